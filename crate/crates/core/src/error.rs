use thiserror::Error;

/// Errors raised while reading or validating queries and catalogs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("relation `{0}` occurs more than once; self-joins are not supported")]
    SelfJoin(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("head variable `{0}` does not occur in any atom")]
    UnboundHead(String),
}

impl QueryError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        QueryError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Errors from the dissociation lattice and the plan machinery.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("invalid dissociation: {0}")]
    InvalidDissociation(String),
    #[error("dissociated query is not hierarchical")]
    NotSafe,
    #[error("plan does not match query: {0}")]
    PlanQueryMismatch(String),
}

/// Errors from loading data and evaluating plans.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("{file}:{line}: {message}")]
    Data { file: String, line: usize, message: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("min branches disagree on answer support ({left} vs {right} rows)")]
    MinSupportMismatch { left: usize, right: usize },
    #[error("unknown view `{0}`")]
    UnknownView(String),
    #[error("lineage exceeds {limit} monomials")]
    LineageTooLarge { limit: usize },
    #[error("scale factor {0} outside (0, 1]")]
    ScaleOutOfRange(f64),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Errors from the exact and sampling oracles.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("formula too large for exact evaluation: {0}")]
    TooLarge(String),
    #[error("no probability given for variable {0}")]
    MissingProbability(String),
    #[error("substitution is not a dissociation of the original formula: {0}")]
    InvalidSubstitution(String),
}

/// Errors from the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("rankings cover different answers ({returned} returned, {truth} in ground truth)")]
    AnswerMismatch { returned: usize, truth: usize },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Query(#[from] QueryError),
}
