//! Synthetic workloads and ranking-quality experiments.
//!
//! Two query families: the k-chain `q(x0,xk) :- R1(x0,x1), ..., Rk(x_{k-1},xk)`
//! and the Boolean k-star `q :- R1(x1), ..., Rk(xk), R0(x1,...,xk)`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::db::{Database, Relation, Value};
use crate::engine::{eval_deterministic, lineage, propagation_score, Strategy, DEFAULT_LINEAGE_CAP};
use crate::error::{EngineError, HarnessError, OracleError};
use crate::oracle::{exact_dnf_prob_with, mc_estimate, OracleLimits};
use crate::query::{Atom, Catalog, Query, Var, VarSet};
use crate::random::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryFamily {
    Chain,
    Star,
}

impl FromStr for QueryFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chain" => Ok(QueryFamily::Chain),
            "star" => Ok(QueryFamily::Star),
            other => Err(format!("unknown query family `{other}` (expected chain or star)")),
        }
    }
}

impl fmt::Display for QueryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryFamily::Chain => "chain",
            QueryFamily::Star => "star",
        })
    }
}

/// Parameters of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub family: QueryFamily,
    /// Number of atoms in the chain, or of satellites in the star.
    pub k: usize,
    /// Tuples per relation (capped by the number of distinct tuples).
    pub n: usize,
    /// Values are drawn from `1..=domain`.
    pub domain: i64,
    pub p_max: f64,
    pub seed: u64,
}

impl GenSpec {
    fn validate(&self) -> Result<(), HarnessError> {
        let min_k = match self.family {
            QueryFamily::Chain => 2,
            QueryFamily::Star => 1,
        };
        if self.k < min_k {
            return Err(HarnessError::Spec(format!("{} needs k >= {min_k}", self.family)));
        }
        if self.n < 1 || self.domain < 1 {
            return Err(HarnessError::Spec("n and N must be at least 1".into()));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(HarnessError::Spec(format!("p_max {} outside (0, 1]", self.p_max)));
        }
        Ok(())
    }
}

fn var(name: String) -> Var {
    Var::new(&name)
}

/// `q(x0,xk) :- R1(x0,x1), ..., Rk(x_{k-1},xk)`, all relations probabilistic.
pub fn chain_query(k: usize) -> (Query, Catalog) {
    let mut catalog = Catalog::new();
    let atoms = (1..=k)
        .map(|i| {
            let name = format!("R{i}");
            catalog.add_relation(&name, 2, true).expect("fresh name");
            Atom {
                relation: name,
                args: vec![var(format!("x{}", i - 1)), var(format!("x{i}"))],
            }
        })
        .collect();
    let head: VarSet = [var("x0".into()), var(format!("x{k}"))].into_iter().collect();
    (Query::new(atoms, head).expect("valid chain"), catalog)
}

/// `q :- R1(x1), ..., Rk(xk), R0(x1,...,xk)`, all relations probabilistic.
pub fn star_query(k: usize) -> (Query, Catalog) {
    let mut catalog = Catalog::new();
    let mut atoms: Vec<Atom> = (1..=k)
        .map(|i| {
            let name = format!("R{i}");
            catalog.add_relation(&name, 1, true).expect("fresh name");
            Atom {
                relation: name,
                args: vec![var(format!("x{i}"))],
            }
        })
        .collect();
    catalog.add_relation("R0", k, true).expect("fresh name");
    atoms.push(Atom {
        relation: "R0".into(),
        args: (1..=k).map(|i| var(format!("x{i}"))).collect(),
    });
    (Query::new(atoms, VarSet::new()).expect("valid star"), catalog)
}

/// A reproducible instance for `spec`.
pub fn generate(spec: &GenSpec) -> Result<(Query, Database, Catalog), HarnessError> {
    spec.validate()?;
    let (q, catalog) = match spec.family {
        QueryFamily::Chain => chain_query(spec.k),
        QueryFamily::Star => star_query(spec.k),
    };
    let mut r = rng(spec.seed);
    let mut db = Database::new();
    for decl in catalog.relations() {
        let capacity = (spec.domain as u128).saturating_pow(decl.arity as u32);
        let target = (spec.n as u128).min(capacity) as usize;
        let mut rel = Relation::new(&decl.name, decl.arity, true);
        let mut seen = std::collections::HashSet::new();
        while seen.len() < target {
            let values: Vec<Value> = (0..decl.arity)
                .map(|_| Value::Int(r.gen_range(1..=spec.domain)))
                .collect();
            if seen.insert(values.clone()) {
                let p = r.gen_range(0.0..=spec.p_max);
                rel.push(values, p).expect("valid tuple");
            }
        }
        db.insert(rel);
    }
    Ok((q, db, catalog))
}

/// Writes `query.txt`, `catalog.txt` and one TSV per relation.
pub fn write_instance(dir: &Path, q: &Query, catalog: &Catalog, db: &Database) -> Result<(), EngineError> {
    db.write_dir(dir)?;
    for (file, text) in [("query.txt", format!("{q}\n")), ("catalog.txt", catalog.to_string())] {
        let path = dir.join(file);
        fs::write(&path, text).map_err(|e| EngineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

/// Scores above this distance apart are distinct; closer ones tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// For every item, the probability that it lands in the top `j`
/// (`j = 1..=k`) when ties are broken uniformly at random.
fn inclusion<K: Ord + Clone>(scores: &BTreeMap<K, f64>, k: usize) -> BTreeMap<K, Vec<f64>> {
    let mut sorted: Vec<(&K, f64)> = scores.iter().map(|(key, &s)| (key, s)).collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out = BTreeMap::new();
    let mut start = 0;
    while start < sorted.len() {
        let anchor = sorted[start].1;
        let end = start
            + sorted[start..]
                .iter()
                .take_while(|(_, s)| (anchor - s).abs() <= TIE_TOLERANCE)
                .count();
        let size = (end - start) as f64;
        for (key, _) in &sorted[start..end] {
            let curve = (1..=k)
                .map(|j| ((j as f64 - start as f64).max(0.0)).min(size) / size)
                .collect();
            out.insert((*key).clone(), curve);
        }
        start = end;
    }
    out
}

/// Tie-aware AP@k: the mean over `j = 1..=k` of the expected fraction of
/// the top `j` ground-truth answers that are also in the top `j` returned,
/// with ties in either ranking broken uniformly at random. With fewer than
/// `j` answers the fraction is taken over all answers.
pub fn average_precision_at_k<K: Ord + Clone>(
    returned: &BTreeMap<K, f64>,
    truth: &BTreeMap<K, f64>,
    k: usize,
) -> Result<f64, HarnessError> {
    if returned.len() != truth.len() || !returned.keys().eq(truth.keys()) {
        return Err(HarnessError::AnswerMismatch {
            returned: returned.len(),
            truth: truth.len(),
        });
    }
    let m = truth.len();
    if m == 0 || k == 0 {
        return Ok(1.0);
    }
    let a = inclusion(returned, k);
    let b = inclusion(truth, k);
    let total: f64 = (1..=k)
        .map(|j| {
            let overlap: f64 = a.iter().map(|(key, ca)| ca[j - 1] * b[key][j - 1]).sum();
            overlap / j.min(m) as f64
        })
        .sum();
    Ok(total / k as f64)
}

/// A ranking method compared against exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Propagation score.
    Dissociation,
    /// Monte-Carlo estimate with the given number of samples per answer.
    MonteCarlo(usize),
    /// Number of monomials in the answer's lineage.
    LineageSize,
    /// Plain query evaluation: every answer ties.
    Deterministic,
    Exact,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Dissociation => f.write_str("dissociation"),
            Method::MonteCarlo(s) => write!(f, "mc({s})"),
            Method::LineageSize => f.write_str("lineage"),
            Method::Deterministic => f.write_str("deterministic"),
            Method::Exact => f.write_str("exact"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("mc") {
            let digits = rest.trim_start_matches([':', '(']).trim_end_matches(')');
            return digits
                .parse()
                .ok()
                .filter(|&n: &usize| n > 0)
                .map(Method::MonteCarlo)
                .ok_or_else(|| format!("bad sample count in `{s}`"));
        }
        match s {
            "dissociation" => Ok(Method::Dissociation),
            "lineage" => Ok(Method::LineageSize),
            "deterministic" => Ok(Method::Deterministic),
            "exact" => Ok(Method::Exact),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// Knobs shared by the experiment drivers.
#[derive(Debug, Clone, Copy)]
pub struct RankOptions {
    pub top_k: usize,
    pub strategy: Strategy,
    pub use_schema: bool,
    pub seed: u64,
    pub limits: OracleLimits,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            top_k: 10,
            strategy: Strategy::AllPlans,
            use_schema: false,
            seed: 0,
            limits: OracleLimits::default(),
        }
    }
}

type Scores = BTreeMap<Vec<Value>, f64>;

fn is_overflow(e: &EngineError) -> bool {
    matches!(
        e,
        EngineError::LineageTooLarge { .. } | EngineError::Oracle(OracleError::TooLarge(_))
    )
}

/// AP@k of each method against exact probabilities on one instance, in the
/// order given. `None` marks a method (or the ground truth) that exceeded
/// the oracle limits.
pub fn rank_methods(
    q: &Query,
    db: &Database,
    catalog: &Catalog,
    methods: &[Method],
    opts: &RankOptions,
) -> Result<Vec<Option<f64>>, HarnessError> {
    let lin = match lineage(q, db, DEFAULT_LINEAGE_CAP) {
        Ok(l) => l,
        Err(e) if is_overflow(&e) => return Ok(vec![None; methods.len()]),
        Err(e) => return Err(e.into()),
    };
    let dist = db.probabilities();
    let mut truth = Scores::new();
    for (answer, f) in &lin.answers {
        match exact_dnf_prob_with(f, &dist, opts.limits) {
            Ok(p) => truth.insert(answer.clone(), p),
            Err(OracleError::TooLarge(_)) => return Ok(vec![None; methods.len()]),
            Err(e) => return Err(EngineError::from(e).into()),
        };
    }
    let mut out = Vec::with_capacity(methods.len());
    for method in methods {
        let scores: Scores = match method {
            Method::Exact => truth.clone(),
            Method::Dissociation => propagation_score(q, db, catalog, opts.strategy, opts.use_schema)?.rows,
            Method::MonteCarlo(samples) => lin
                .answers
                .iter()
                .enumerate()
                .map(|(i, (answer, f))| {
                    let seed = derive_seed(opts.seed, i as u64);
                    let est = mc_estimate(f, &dist, *samples, seed).map_err(EngineError::from)?;
                    Ok((answer.clone(), est))
                })
                .collect::<Result<_, HarnessError>>()?,
            Method::LineageSize => lin.answers.iter().map(|(a, f)| (a.clone(), f.len() as f64)).collect(),
            Method::Deterministic => lin.answers.keys().map(|a| (a.clone(), 1.0)).collect(),
        };
        out.push(Some(average_precision_at_k(&scores, &truth, opts.top_k)?));
    }
    Ok(out)
}

/// Deterministic child seed for position `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut s = SplitMix64::seed_from_u64(master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    s.next_u64()
}

/// One experiment's settings, read from a `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: QueryFamily,
    pub k: usize,
    pub n: usize,
    pub domain: i64,
    pub p_max: f64,
    pub seed: u64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub top_k: usize,
    pub factors: Vec<f64>,
    pub use_schema: bool,
    pub strategy: Strategy,
    /// Keep only instances whose answer count lies in this range.
    pub min_answers: usize,
    pub max_answers: usize,
    /// Instances drawn per trial before giving up on the answer range.
    pub max_attempts: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: QueryFamily::Chain,
            k: 4,
            n: 200,
            domain: 200,
            p_max: 0.1,
            seed: 1,
            trials: 20,
            methods: vec![
                Method::Dissociation,
                Method::MonteCarlo(1000),
                Method::LineageSize,
                Method::Deterministic,
            ],
            top_k: 10,
            factors: vec![1.0, 0.5, 0.1, 0.01],
            use_schema: false,
            strategy: Strategy::AllPlans,
            min_answers: 1,
            max_answers: usize::MAX,
            max_attempts: 200,
        }
    }
}

pub fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "all" | "none" => Ok(Strategy::AllPlans),
        "1" => Ok(Strategy::Opt1),
        "12" => Ok(Strategy::Opt12),
        "123" => Ok(Strategy::Opt123),
        other => Err(format!("unknown strategy `{other}` (expected none, 1, 12 or 123)")),
    }
}

fn strategy_label(s: Strategy) -> &'static str {
    match s {
        Strategy::AllPlans => "none",
        Strategy::Opt1 => "1",
        Strategy::Opt12 => "12",
        Strategy::Opt123 => "123",
    }
}

/// Parses `key = value` lines; `#` starts a comment. Unset keys keep their
/// defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| HarnessError::Config { line: idx + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        fn num<T: FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("`{v}` is not a valid number"))
        }
        let result: Result<(), String> = (|| {
            match key {
                "shape" | "family" => cfg.family = value.parse()?,
                "k" => cfg.k = num(value)?,
                "n" => cfg.n = num(value)?,
                "N" | "domain" => cfg.domain = num(value)?,
                "pmax" | "p_max" => cfg.p_max = num(value)?,
                "seed" => cfg.seed = num(value)?,
                "trials" => cfg.trials = num(value)?,
                "top_k" => cfg.top_k = num(value)?,
                "min_answers" => cfg.min_answers = num(value)?,
                "max_answers" => cfg.max_answers = num(value)?,
                "max_attempts" => cfg.max_attempts = num(value)?,
                "schema" => cfg.use_schema = num(value)?,
                "strategy" | "opt" => cfg.strategy = parse_strategy(value)?,
                "methods" => cfg.methods = value.split(',').map(str::parse).collect::<Result<_, _>>()?,
                "factors" => cfg.factors = value.split(',').map(|f| num(f.trim())).collect::<Result<_, _>>()?,
                other => return Err(format!("unknown key `{other}`")),
            }
            Ok(())
        })();
        result.map_err(err)?;
    }
    Ok(cfg)
}

impl ExperimentConfig {
    fn spec(&self, seed: u64) -> GenSpec {
        GenSpec {
            family: self.family,
            k: self.k,
            n: self.n,
            domain: self.domain,
            p_max: self.p_max,
            seed,
        }
    }

    fn params(&self) -> Vec<(String, String)> {
        let methods: Vec<String> = self.methods.iter().map(Method::to_string).collect();
        let factors: Vec<String> = self.factors.iter().map(f64::to_string).collect();
        vec![
            ("shape".into(), self.family.to_string()),
            ("k".into(), self.k.to_string()),
            ("n".into(), self.n.to_string()),
            ("N".into(), self.domain.to_string()),
            ("pmax".into(), self.p_max.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("trials".into(), self.trials.to_string()),
            ("methods".into(), methods.join(",")),
            ("top_k".into(), self.top_k.to_string()),
            ("factors".into(), factors.join(",")),
            ("schema".into(), self.use_schema.to_string()),
            ("strategy".into(), strategy_label(self.strategy).into()),
        ]
    }

    /// The instance of trial `t`: the first draw whose answer count lies in
    /// the configured range.
    pub fn instance(&self, t: usize) -> Result<(Query, Database, Catalog, u64), HarnessError> {
        for attempt in 0..self.max_attempts {
            let seed = derive_seed(self.seed, (t as u64) << 20 | attempt as u64);
            let (q, db, catalog) = generate(&self.spec(seed))?;
            let answers = eval_deterministic(&q, &db)?.len();
            if (self.min_answers..=self.max_answers).contains(&answers) {
                return Ok((q, db, catalog, seed));
            }
        }
        Err(HarnessError::Spec(format!(
            "no instance with {}..={} answers in {} attempts",
            self.min_answers, self.max_answers, self.max_attempts
        )))
    }

    fn rank_options(&self, seed: u64) -> RankOptions {
        RankOptions {
            top_k: self.top_k,
            strategy: self.strategy,
            use_schema: self.use_schema,
            seed,
            limits: OracleLimits::default(),
        }
    }
}

/// Mean and sample standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub answers: usize,
    /// AP@k per method, in config order.
    pub ap: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub map: f64,
    pub std: f64,
    pub trials: usize,
    pub unavailable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub params: Vec<(String, String)>,
    pub trials: Vec<TrialOutcome>,
    pub summary: Vec<MethodSummary>,
}

impl RankingReport {
    /// Parameters as comments, then one row per trial and one per method.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.params {
            let _ = writeln!(out, "# {k}={v}");
        }
        let methods: Vec<String> = self.summary.iter().map(|s| s.method.to_string()).collect();
        let _ = writeln!(out, "trial\tseed\tanswers\t{}", methods.join("\t"));
        for (i, t) in self.trials.iter().enumerate() {
            let aps: Vec<String> =
                t.ap.iter()
                    .map(|a| a.map_or("NA".into(), |v| format!("{v:.6}")))
                    .collect();
            let _ = writeln!(out, "{i}\t{}\t{}\t{}", t.seed, t.answers, aps.join("\t"));
        }
        let _ = writeln!(out, "method\tMAP\tstd\ttrials\tunavailable");
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{}\t{}",
                s.method, s.map, s.std, s.trials, s.unavailable
            );
        }
        out
    }
}

/// Runs every trial of `cfg` and aggregates MAP per method.
pub fn ranking_experiment(cfg: &ExperimentConfig) -> Result<RankingReport, HarnessError> {
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let (q, db, catalog, seed) = cfg.instance(t)?;
        let answers = eval_deterministic(&q, &db)?.len();
        let ap = rank_methods(&q, &db, &catalog, &cfg.methods, &cfg.rank_options(seed))?;
        trials.push(TrialOutcome { seed, answers, ap });
    }
    let summary = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let aps: Vec<f64> = trials.iter().filter_map(|t| t.ap[i]).collect();
            let (map, std) = mean_std(&aps);
            MethodSummary {
                method,
                map,
                std,
                trials: aps.len(),
                unavailable: trials.len() - aps.len(),
            }
        })
        .collect();
    Ok(RankingReport {
        params: cfg.params(),
        trials,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub factor: f64,
    /// Mean of `(ρ - P) / P` over answers with `P > 0`; `None` if there are none.
    pub mean_relative_error: Option<f64>,
    /// AP@k of the exact ranking after scaling against the unscaled one.
    pub ap_vs_unscaled: f64,
    pub answers: usize,
}

/// Relative error of the propagation score and ranking stability as all
/// probabilities shrink by each factor.
pub fn scaling_experiment(
    q: &Query,
    db: &Database,
    catalog: &Catalog,
    factors: &[f64],
    opts: &RankOptions,
) -> Result<Vec<ScalingRow>, HarnessError> {
    let exact_of = |db: &Database| -> Result<Scores, HarnessError> {
        let lin = lineage(q, db, DEFAULT_LINEAGE_CAP)?;
        let dist = db.probabilities();
        lin.answers
            .iter()
            .map(|(a, f)| {
                Ok((
                    a.clone(),
                    exact_dnf_prob_with(f, &dist, opts.limits).map_err(EngineError::from)?,
                ))
            })
            .collect()
    };
    let base = exact_of(db)?;
    factors
        .iter()
        .map(|&factor| {
            let scaled = crate::db::scale_database(db, factor)?;
            let exact = exact_of(&scaled)?;
            let rho = propagation_score(q, &scaled, catalog, opts.strategy, opts.use_schema)?.rows;
            let errors: Vec<f64> = exact
                .iter()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| (rho[a] - p) / p)
                .collect();
            Ok(ScalingRow {
                factor,
                mean_relative_error: (!errors.is_empty()).then(|| mean_std(&errors).0),
                ap_vs_unscaled: average_precision_at_k(&exact, &base, opts.top_k)?,
                answers: exact.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub params: Vec<(String, String)>,
    pub trials: Vec<(u64, Vec<ScalingRow>)>,
}

impl ScalingReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.params {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "trial\tseed\tfactor\tanswers\tmean_rel_error\tap_vs_unscaled");
        for (i, (seed, rows)) in self.trials.iter().enumerate() {
            for r in rows {
                let err = r.mean_relative_error.map_or("NA".into(), |e| format!("{e:.6e}"));
                let _ = writeln!(
                    out,
                    "{i}\t{seed}\t{}\t{}\t{err}\t{:.6}",
                    r.factor, r.answers, r.ap_vs_unscaled
                );
            }
        }
        out
    }
}

pub fn scaling_experiment_config(cfg: &ExperimentConfig) -> Result<ScalingReport, HarnessError> {
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let (q, db, catalog, seed) = cfg.instance(t)?;
        trials.push((
            seed,
            scaling_experiment(&q, &db, &catalog, &cfg.factors, &cfg.rank_options(seed))?,
        ));
    }
    Ok(ScalingReport {
        params: cfg.params(),
        trials,
    })
}
