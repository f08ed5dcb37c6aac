//! In-memory tuple-independent probabilistic database.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::EngineError;
use crate::query::{Catalog, RelationDecl};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Text(Arc<str>),
}

impl Value {
    pub fn parse(s: &str) -> Value {
        match s.parse::<i64>() {
            Ok(n) => Value::Int(n),
            Err(_) => Value::Text(Arc::from(s)),
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

/// Renders a head tuple as `(1,4)`; the Boolean answer is `()`.
pub fn format_answer(values: &[Value]) -> String {
    let parts: Vec<String> = values.iter().map(Value::to_string).collect();
    format!("({})", parts.join(","))
}

/// Stable identifier of an input tuple: relation name and row index in load order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleId {
    pub relation: Arc<str>,
    pub row: usize,
}

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.relation, self.row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tuple {
    pub values: Vec<Value>,
    pub p: f64,
    /// Row index in load order; survives filtering.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    name: Arc<str>,
    arity: usize,
    probabilistic: bool,
    tuples: Vec<Tuple>,
}

impl Relation {
    pub fn new(name: &str, arity: usize, probabilistic: bool) -> Self {
        Relation {
            name: Arc::from(name),
            arity,
            probabilistic,
            tuples: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_probabilistic(&self) -> bool {
        self.probabilistic
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuple_id(&self, tuple: &Tuple) -> TupleId {
        TupleId {
            relation: self.name.clone(),
            row: tuple.row,
        }
    }

    /// Appends a tuple with the next row index. Deterministic relations force `p = 1`.
    pub fn push(&mut self, values: Vec<Value>, p: f64) -> Result<(), EngineError> {
        let row = self.tuples.iter().map(|t| t.row + 1).max().unwrap_or(0);
        self.push_with_row(values, p, row)
    }

    pub(crate) fn push_with_row(&mut self, values: Vec<Value>, p: f64, row: usize) -> Result<(), EngineError> {
        let bad = |message: String| EngineError::Data {
            file: self.name.to_string(),
            line: row + 1,
            message,
        };
        if values.len() != self.arity {
            return Err(bad(format!("expected {} values, found {}", self.arity, values.len())));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("probability {p} outside [0,1]")));
        }
        if !self.probabilistic && p != 1.0 {
            return Err(bad(format!("deterministic relation carries probability {p}")));
        }
        self.tuples.push(Tuple { values, p, row });
        Ok(())
    }

    pub(crate) fn retain(&mut self, keep: impl FnMut(&Tuple) -> bool) {
        self.tuples.retain(keep);
    }

    pub(crate) fn tuples_mut(&mut self) -> &mut [Tuple] {
        &mut self.tuples
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty database with one relation per catalog entry.
    pub fn empty_for(catalog: &Catalog) -> Self {
        let mut db = Database::new();
        for decl in catalog.relations() {
            db.insert(Relation::new(&decl.name, decl.arity, decl.probabilistic));
        }
        db
    }

    pub fn insert(&mut self, relation: Relation) {
        self.relations.insert(relation.name().to_string(), relation);
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relation_mut(&mut self, name: &str) -> Option<&mut Relation> {
        self.relations.get_mut(name)
    }

    pub fn get(&self, name: &str) -> Result<&Relation, EngineError> {
        self.relation(name)
            .ok_or_else(|| EngineError::UnknownRelation(name.to_string()))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    /// Probability of every tuple, keyed by its identifier.
    pub fn probabilities(&self) -> BTreeMap<TupleId, f64> {
        self.relations
            .values()
            .flat_map(|r| r.tuples.iter().map(move |t| (r.tuple_id(t), t.p)))
            .collect()
    }

    /// Writes one `<relation>.tsv` per relation into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), EngineError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        for rel in self.relations.values() {
            let path = dir.join(format!("{}.tsv", rel.name()));
            fs::write(&path, relation_to_tsv(rel)).map_err(|e| io_error(&path, e))?;
        }
        Ok(())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> EngineError {
    EngineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Serializes a relation: tab-separated values, then the probability for
/// probabilistic relations.
pub fn relation_to_tsv(rel: &Relation) -> String {
    let mut out = String::new();
    for t in rel.tuples() {
        let mut fields: Vec<String> = t.values.iter().map(Value::to_string).collect();
        if rel.is_probabilistic() {
            fields.push(t.p.to_string());
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

/// Parses one relation from TSV text. The last column is the probability;
/// deterministic relations may omit it.
pub fn parse_relation_tsv(text: &str, decl: &RelationDecl, file: &str) -> Result<Relation, EngineError> {
    let mut rel = Relation::new(&decl.name, decl.arity, decl.probabilistic);
    let mut seen = HashSet::new();
    let mut row = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let bad = |message: String| EngineError::Data {
            file: file.to_string(),
            line: line_no,
            message,
        };
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        let (values, p) = if fields.len() == decl.arity + 1 {
            let p_text = fields[decl.arity].trim();
            let p: f64 = p_text
                .parse()
                .map_err(|_| bad(format!("non-numeric probability `{p_text}`")))?;
            (&fields[..decl.arity], p)
        } else if fields.len() == decl.arity && !decl.probabilistic {
            (&fields[..], 1.0)
        } else {
            return Err(bad(format!(
                "expected {} columns for {}/{}, found {}",
                decl.arity + usize::from(decl.probabilistic),
                decl.name,
                decl.arity,
                fields.len()
            )));
        };
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("probability {p} outside [0,1]")));
        }
        if !decl.probabilistic && p != 1.0 {
            return Err(bad(format!("deterministic relation carries probability {p}")));
        }
        let values: Vec<Value> = values.iter().map(|v| Value::parse(v.trim())).collect();
        if !seen.insert(values.clone()) {
            return Err(bad("duplicate tuple".to_string()));
        }
        rel.push_with_row(values, p, row).map_err(|e| match e {
            EngineError::Data { message, .. } => bad(message),
            other => other,
        })?;
        row += 1;
    }
    Ok(rel)
}

/// Loads `<dir>/<relation>.tsv` for every relation in the catalog.
pub fn load_database(dir: &Path, catalog: &Catalog) -> Result<Database, EngineError> {
    let mut db = Database::new();
    for decl in catalog.relations() {
        let path = dir.join(format!("{}.tsv", decl.name));
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        db.insert(parse_relation_tsv(&text, decl, &path.display().to_string())?);
    }
    Ok(db)
}

/// Multiplies every probabilistic tuple's probability by `factor`.
pub fn scale_database(db: &Database, factor: f64) -> Result<Database, EngineError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(EngineError::ScaleOutOfRange(factor));
    }
    let mut out = db.clone();
    for rel in out.relations.values_mut() {
        if rel.is_probabilistic() {
            for t in rel.tuples_mut() {
                t.p *= factor;
            }
        }
    }
    Ok(out)
}
