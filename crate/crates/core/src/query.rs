//! Queries, catalogs, and the structural analysis the rest of the crate
//! builds on: connectivity, separator variables and the hierarchy test.
//!
//! Head variables are always treated as constants by the structural
//! operations. Connectivity is computed over the remaining (existential)
//! variables only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::QueryError;

/// A query variable. Cheap to clone; ordered by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

pub type VarSet = BTreeSet<Var>;

/// Builds a variable set from names; handy in tests and examples.
pub fn vars<'a>(names: impl IntoIterator<Item = &'a str>) -> VarSet {
    names.into_iter().map(Var::new).collect()
}

pub(crate) fn fmt_var_set(set: &VarSet) -> String {
    let names: Vec<&str> = set.iter().map(Var::name).collect();
    format!("{{{}}}", names.join(","))
}

/// Separator used in the names of dissociated relations, `R__x_y`.
pub const DISSOCIATION_SEPARATOR: &str = "__";

/// Strips a dissociation suffix from a relation name.
pub fn base_relation_name(name: &str) -> &str {
    match name.find(DISSOCIATION_SEPARATOR) {
        Some(pos) => &name[..pos],
        None => name,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub arity: usize,
    pub probabilistic: bool,
}

/// A functional dependency on attribute positions (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalDependency {
    pub relation: String,
    pub determinant: Vec<usize>,
    pub dependent: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    relations: Vec<RelationDecl>,
    fds: Vec<FunctionalDependency>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_relation(&mut self, name: &str, arity: usize, probabilistic: bool) -> Result<(), QueryError> {
        if name.contains(DISSOCIATION_SEPARATOR) {
            return Err(QueryError::Schema(format!(
                "relation name `{name}` may not contain `{DISSOCIATION_SEPARATOR}`"
            )));
        }
        if self.relation(name).is_some() {
            return Err(QueryError::Schema(format!("relation `{name}` declared twice")));
        }
        self.relations.push(RelationDecl {
            name: name.to_string(),
            arity,
            probabilistic,
        });
        Ok(())
    }

    pub fn add_fd(&mut self, relation: &str, determinant: Vec<usize>, dependent: Vec<usize>) -> Result<(), QueryError> {
        let decl = self
            .relation(relation)
            .ok_or_else(|| QueryError::Schema(format!("fd on undeclared relation `{relation}`")))?;
        if let Some(&bad) = determinant.iter().chain(&dependent).find(|&&pos| pos >= decl.arity) {
            return Err(QueryError::Schema(format!(
                "fd position {} out of range for {}/{}",
                bad + 1,
                decl.name,
                decl.arity
            )));
        }
        self.fds.push(FunctionalDependency {
            relation: relation.to_string(),
            determinant,
            dependent,
        });
        Ok(())
    }

    pub fn relations(&self) -> &[RelationDecl] {
        &self.relations
    }

    pub fn fds(&self) -> &[FunctionalDependency] {
        &self.fds
    }

    /// Looks up a relation, resolving dissociated names to their base relation.
    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        let base = base_relation_name(name);
        self.relations.iter().find(|r| r.name == base)
    }

    /// Unknown relations count as probabilistic.
    pub fn is_probabilistic(&self, name: &str) -> bool {
        self.relation(name).is_none_or(|r| r.probabilistic)
    }

    pub fn fds_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a FunctionalDependency> {
        let base = base_relation_name(name);
        self.fds.iter().filter(move |fd| fd.relation == base)
    }
}

impl fmt::Display for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            let kind = if r.probabilistic { "prob" } else { "det" };
            writeln!(f, "{}/{} {}", r.name, r.arity, kind)?;
        }
        for fd in &self.fds {
            let pos = |v: &[usize]| v.iter().map(|p| (p + 1).to_string()).collect::<Vec<_>>().join(",");
            writeln!(
                f,
                "fd {}: {} -> {}",
                fd.relation,
                pos(&fd.determinant),
                pos(&fd.dependent)
            )?;
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses the line-oriented catalog format:
///
/// ```text
/// R/2 prob
/// T/1 det
/// fd S: 1 -> 2
/// ```
pub fn parse_catalog(text: &str) -> Result<Catalog, QueryError> {
    let mut catalog = Catalog::new();
    let mut pending_fds = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("fd ") {
            let (rel, deps) = rest
                .split_once(':')
                .ok_or_else(|| QueryError::parse(line_no, "expected `fd R: a -> b`"))?;
            let (lhs, rhs) = deps
                .split_once("->")
                .ok_or_else(|| QueryError::parse(line_no, "expected `->` in fd"))?;
            let positions = |s: &str| -> Result<Vec<usize>, QueryError> {
                s.split(',')
                    .map(|p| {
                        let p = p.trim();
                        match p.parse::<usize>() {
                            Ok(n) if n >= 1 => Ok(n - 1),
                            _ => Err(QueryError::parse(
                                line_no,
                                format!("bad attribute position `{p}` (positions start at 1)"),
                            )),
                        }
                    })
                    .collect()
            };
            pending_fds.push((line_no, rel.trim().to_string(), positions(lhs)?, positions(rhs)?));
            continue;
        }
        let mut parts = line.split_whitespace();
        let decl = parts.next().unwrap_or_default();
        let (name, arity) = decl
            .split_once('/')
            .ok_or_else(|| QueryError::parse(line_no, "expected `Name/arity`"))?;
        if !is_identifier(name) {
            return Err(QueryError::parse(line_no, format!("bad relation name `{name}`")));
        }
        let arity: usize = arity
            .parse()
            .map_err(|_| QueryError::parse(line_no, format!("bad arity `{arity}`")))?;
        let probabilistic = match parts.next() {
            None | Some("prob") => true,
            Some("det") => false,
            Some(other) => {
                return Err(QueryError::parse(
                    line_no,
                    format!("expected `prob` or `det`, found `{other}`"),
                ))
            }
        };
        if let Some(extra) = parts.next() {
            return Err(QueryError::parse(line_no, format!("unexpected `{extra}`")));
        }
        catalog.add_relation(name, arity, probabilistic)?;
    }
    for (_, rel, lhs, rhs) in pending_fds {
        catalog.add_fd(&rel, lhs, rhs)?;
    }
    Ok(catalog)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Var>,
}

impl Atom {
    pub fn new(relation: &str, args: &[&str]) -> Self {
        Atom {
            relation: relation.to_string(),
            args: args.iter().map(|a| Var::new(a)).collect(),
        }
    }

    pub fn vars(&self) -> VarSet {
        self.args.iter().cloned().collect()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<&str> = self.args.iter().map(Var::name).collect();
        write!(f, "{}({})", self.relation, args.join(","))
    }
}

/// A self-join-free conjunctive query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    name: String,
    atoms: Vec<Atom>,
    head: VarSet,
}

impl Query {
    pub fn new(atoms: Vec<Atom>, head: VarSet) -> Result<Self, QueryError> {
        Self::named("q", atoms, head)
    }

    pub fn named(name: &str, atoms: Vec<Atom>, head: VarSet) -> Result<Self, QueryError> {
        let mut seen = BTreeSet::new();
        for atom in &atoms {
            if !seen.insert(atom.relation.as_str()) {
                return Err(QueryError::SelfJoin(atom.relation.clone()));
            }
        }
        let all: VarSet = atoms.iter().flat_map(|a| a.args.iter().cloned()).collect();
        if let Some(v) = head.iter().find(|v| !all.contains(*v)) {
            return Err(QueryError::UnboundHead(v.name().to_string()));
        }
        Ok(Query {
            name: name.to_string(),
            atoms,
            head,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn head(&self) -> &VarSet {
        &self.head
    }

    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    pub fn vars(&self) -> VarSet {
        self.atoms.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }

    pub fn evars(&self) -> VarSet {
        self.vars().difference(&self.head).cloned().collect()
    }

    /// Indices of the atoms containing `x`.
    pub fn atoms_of(&self, x: &Var) -> BTreeSet<usize> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.args.contains(x))
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks relation names and arities against a catalog.
    pub fn check_schema(&self, catalog: &Catalog) -> Result<(), QueryError> {
        for atom in &self.atoms {
            let decl = catalog
                .relation(&atom.relation)
                .ok_or_else(|| QueryError::Schema(format!("unknown relation `{}`", atom.relation)))?;
            if decl.arity != atom.args.len() {
                return Err(QueryError::Schema(format!(
                    "`{}` has arity {} but is used with {} arguments",
                    atom.relation,
                    decl.arity,
                    atom.args.len()
                )));
            }
        }
        Ok(())
    }

    /// The subquery over the given atom indices, with head restricted to
    /// the variables it still mentions.
    pub fn subquery(&self, indices: &[usize]) -> Query {
        let atoms: Vec<Atom> = indices.iter().map(|&i| self.atoms[i].clone()).collect();
        let vars: VarSet = atoms.iter().flat_map(|a| a.args.iter().cloned()).collect();
        Query {
            name: self.name.clone(),
            head: self.head.intersection(&vars).cloned().collect(),
            atoms,
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<&str> = self.head.iter().map(Var::name).collect();
        let body: Vec<String> = self.atoms.iter().map(Atom::to_string).collect();
        write!(f, "{}({}) :- {}", self.name, head.join(","), body.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Other(String),
    LParen,
    RParen,
    Comma,
    Turnstile,
    Dot,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, QueryError> {
    let mut tokens = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                c if c.is_whitespace() => i += 1,
                '(' => {
                    tokens.push((line_no, Token::LParen));
                    i += 1;
                }
                ')' => {
                    tokens.push((line_no, Token::RParen));
                    i += 1;
                }
                ',' => {
                    tokens.push((line_no, Token::Comma));
                    i += 1;
                }
                '.' => {
                    tokens.push((line_no, Token::Dot));
                    i += 1;
                }
                ':' if chars.get(i + 1) == Some(&'-') => {
                    tokens.push((line_no, Token::Turnstile));
                    i += 2;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    tokens.push((line_no, Token::Ident(chars[start..i].iter().collect())));
                }
                '\'' | '"' => {
                    let start = i;
                    i += 1;
                    while i < chars.len() && chars[i] != c {
                        i += 1;
                    }
                    i = (i + 1).min(chars.len());
                    tokens.push((line_no, Token::Other(chars[start..i].iter().collect())));
                }
                c if c.is_ascii_digit() || c == '-' => {
                    let start = i;
                    i += 1;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                        i += 1;
                    }
                    tokens.push((line_no, Token::Other(chars[start..i].iter().collect())));
                }
                other => return Err(QueryError::parse(line_no, format!("unexpected character `{other}`"))),
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(1, |(l, _)| *l)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        tok
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), QueryError> {
        let line = self.line();
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(QueryError::parse(line, format!("expected {what}, found {t:?}"))),
            None => Err(QueryError::parse(line, format!("expected {what}, found end of input"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        let line = self.line();
        match self.next() {
            Some(Token::Ident(s)) => Ok(s),
            Some(t) => Err(QueryError::parse(line, format!("expected {what}, found {t:?}"))),
            None => Err(QueryError::parse(line, format!("expected {what}, found end of input"))),
        }
    }

    fn variable(&mut self) -> Result<Var, QueryError> {
        let line = self.line();
        match self.next() {
            Some(Token::Ident(s)) if s.starts_with(|c: char| c.is_ascii_lowercase() || c == '_') => Ok(Var::new(&s)),
            Some(Token::Ident(s)) | Some(Token::Other(s)) => Err(QueryError::parse(
                line,
                format!("`{s}` is a constant; atom arguments must be lowercase variables"),
            )),
            Some(t) => Err(QueryError::parse(line, format!("expected variable, found {t:?}"))),
            None => Err(QueryError::parse(line, "expected variable, found end of input")),
        }
    }

    fn arg_list(&mut self) -> Result<Vec<Var>, QueryError> {
        self.expect(Token::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek() == Some(&Token::RParen) {
            self.next();
            return Ok(args);
        }
        loop {
            args.push(self.variable()?);
            let line = self.line();
            match self.next() {
                Some(Token::Comma) => continue,
                Some(Token::RParen) => return Ok(args),
                _ => return Err(QueryError::parse(line, "expected `,` or `)` in argument list")),
            }
        }
    }
}

/// Parses `name(head) :- R(x,y), S(y)` without consulting a catalog.
pub fn parse_query_unchecked(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(QueryError::parse(1, "empty query"));
    }
    let mut p = Parser { tokens, pos: 0 };
    let name = p.ident("query name")?;
    let head_args = p.arg_list()?;
    p.expect(Token::Turnstile, "`:-`")?;
    let mut atoms = Vec::new();
    loop {
        let relation = p.ident("relation name")?;
        let args = p.arg_list()?;
        atoms.push(Atom { relation, args });
        match p.peek() {
            Some(Token::Comma) => {
                p.next();
            }
            Some(Token::Dot) => {
                p.next();
                break;
            }
            None => break,
            Some(_) => return Err(QueryError::parse(p.line(), "expected `,` between atoms")),
        }
    }
    if p.peek().is_some() {
        return Err(QueryError::parse(p.line(), "trailing input after query"));
    }
    Query::named(&name, atoms, head_args.into_iter().collect())
}

/// Parses a query and validates it against the catalog.
pub fn parse_query(text: &str, catalog: &Catalog) -> Result<Query, QueryError> {
    let q = parse_query_unchecked(text)?;
    q.check_schema(catalog)?;
    Ok(q)
}

/// Partitions the given atoms into groups connected through variables not in `removed`.
pub(crate) fn partition<'a, F>(atoms: &[usize], vars_of: F, removed: &VarSet) -> Vec<Vec<usize>>
where
    F: Fn(usize) -> &'a VarSet,
{
    let n = atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut owner: BTreeMap<&Var, usize> = BTreeMap::new();
    for (pos, &atom) in atoms.iter().enumerate() {
        for v in vars_of(atom) {
            if removed.contains(v) {
                continue;
            }
            match owner.get(v) {
                Some(&other) => {
                    let (a, b) = (find(&mut parent, pos), find(&mut parent, other));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(v, pos);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, &atom) in atoms.iter().enumerate() {
        let root = find(&mut parent, pos);
        groups.entry(root).or_default().push(atom);
    }
    groups.into_values().collect()
}

/// Splits `q` into maximal groups of atoms connected by variables outside `anchors`.
pub fn connected_components(q: &Query, anchors: &VarSet) -> Vec<Query> {
    let var_sets: Vec<VarSet> = q.atoms.iter().map(Atom::vars).collect();
    let indices: Vec<usize> = (0..q.atoms.len()).collect();
    partition(&indices, |i| &var_sets[i], anchors)
        .into_iter()
        .map(|group| q.subquery(&group))
        .collect()
}

/// Existential variables that occur in every atom.
pub fn separator_vars(q: &Query) -> VarSet {
    let mut sets = q.atoms.iter().map(Atom::vars);
    let Some(first) = sets.next() else {
        return VarSet::new();
    };
    sets.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
        .difference(&q.head)
        .cloned()
        .collect()
}

pub(crate) fn is_hierarchical_sets(var_sets: &[VarSet], head: &VarSet) -> bool {
    let mut at: BTreeMap<&Var, BTreeSet<usize>> = BTreeMap::new();
    for (i, set) in var_sets.iter().enumerate() {
        for v in set.difference(head) {
            at.entry(v).or_default().insert(i);
        }
    }
    let groups: Vec<&BTreeSet<usize>> = at.values().collect();
    groups.iter().enumerate().all(|(i, a)| {
        groups[i + 1..]
            .iter()
            .all(|b| a.is_subset(b) || b.is_subset(a) || a.is_disjoint(b))
    })
}

/// True iff the atom sets of any two existential variables are nested or disjoint.
pub fn is_hierarchical(q: &Query) -> bool {
    let sets: Vec<VarSet> = q.atoms.iter().map(Atom::vars).collect();
    is_hierarchical_sets(&sets, &q.head)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableReport {
    pub evar: VarSet,
    pub separator_vars: VarSet,
    pub components: Vec<Query>,
}

pub fn analyze(q: &Query) -> VariableReport {
    VariableReport {
        evar: q.evars(),
        separator_vars: separator_vars(q),
        components: connected_components(q, q.head()),
    }
}
