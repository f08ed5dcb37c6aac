//! Portable SQL for a view set.
//!
//! Base tables are expected to have columns `a1..an` plus `p` (the latter
//! only for probabilistic relations). Every intermediate result has one
//! column per head variable, in sorted order, and a score column `p`.
//! Scores enter `LN` clamped to at most `1 - 1e-12`, so certain tuples
//! contribute a score within 1e-12 of 1 instead of failing.

use std::fmt::Write as _;

use crate::optimize::ViewSet;
use crate::plan::Plan;
use crate::query::{Atom, Catalog, Query, Var};

const CLAMP: &str = "0.999999999999";

struct Emitter<'a> {
    catalog: &'a Catalog,
    /// Read the `_reduced` copies of the base tables.
    reduced: bool,
    next_alias: usize,
}

impl Emitter<'_> {
    fn alias(&mut self) -> String {
        self.next_alias += 1;
        format!("t{}", self.next_alias)
    }

    fn table(&self, relation: &str) -> String {
        if self.reduced {
            format!("{relation}_reduced")
        } else {
            relation.to_string()
        }
    }

    fn select(&mut self, p: &Plan) -> String {
        match p {
            Plan::Scan(atom) => self.scan(atom),
            Plan::View { name, head } => {
                let cols = columns(head.iter(), None);
                format!("SELECT {cols}p FROM {name}")
            }
            Plan::Project { head, input } => {
                let inner = self.select(input);
                let t = self.alias();
                let agg = format!("1 - EXP(SUM(LN(1 - LEAST({t}.p, {CLAMP}))))");
                self.aggregate(
                    &head.iter().cloned().collect::<Vec<_>>(),
                    &agg,
                    &format!("({inner}) {t}"),
                    &t,
                )
            }
            Plan::Join(children) => {
                let mut from = Vec::new();
                let mut owner: Vec<(Var, String)> = Vec::new();
                let mut conds = Vec::new();
                let mut scores = Vec::new();
                for c in children {
                    let inner = self.select(c);
                    let t = self.alias();
                    for v in c.head() {
                        match owner.iter().find(|(w, _)| *w == v) {
                            Some((_, first)) => conds.push(format!("{first}.{v} = {t}.{v}")),
                            None => owner.push((v.clone(), t.clone())),
                        }
                    }
                    scores.push(format!("{t}.p"));
                    from.push(format!("({inner}) {t}"));
                }
                owner.sort();
                let cols: String = owner.iter().map(|(v, t)| format!("{t}.{v}, ")).collect();
                let mut sql = format!("SELECT {cols}{} AS p FROM {}", scores.join(" * "), from.join(", "));
                if !conds.is_empty() {
                    let _ = write!(sql, " WHERE {}", conds.join(" AND "));
                }
                sql
            }
            Plan::Min(children) => {
                let head = p.head();
                let branches: Vec<String> = children.iter().map(|c| self.select(c)).collect();
                let t = self.alias();
                let source = format!("({}) {t}", branches.join(" UNION ALL "));
                self.aggregate(
                    &head.into_iter().collect::<Vec<_>>(),
                    &format!("MIN({t}.p)"),
                    &source,
                    &t,
                )
            }
        }
    }

    /// `SELECT head, agg AS p FROM source GROUP BY head`. Without a head
    /// the aggregate would yield a row even on empty input, so the row count
    /// is checked instead.
    fn aggregate(&mut self, head: &[Var], agg: &str, source: &str, t: &str) -> String {
        if head.is_empty() {
            let n = self.alias();
            return format!("SELECT {n}.p FROM (SELECT {agg} AS p, COUNT(*) AS n FROM {source}) {n} WHERE {n}.n > 0");
        }
        let cols = columns(head.iter(), Some(t));
        let grouped: Vec<String> = head.iter().map(|v| format!("{t}.{v}")).collect();
        format!("SELECT {cols}{agg} AS p FROM {source} GROUP BY {}", grouped.join(", "))
    }

    fn scan(&mut self, atom: &Atom) -> String {
        let t = self.alias();
        let mut first: Vec<(&Var, usize)> = Vec::new();
        let mut conds = Vec::new();
        for (i, v) in atom.args.iter().enumerate() {
            match first.iter().find(|(w, _)| *w == v) {
                Some(&(_, j)) => conds.push(format!("{t}.a{} = {t}.a{}", j + 1, i + 1)),
                None => first.push((v, i)),
            }
        }
        first.sort();
        let cols: String = first.iter().map(|(v, i)| format!("{t}.a{} AS {v}, ", i + 1)).collect();
        let score = if self.catalog.is_probabilistic(&atom.relation) {
            format!("{t}.p")
        } else {
            "1.0".to_string()
        };
        let mut sql = format!("SELECT {cols}{score} AS p FROM {} {t}", self.table(&atom.relation));
        if !conds.is_empty() {
            let _ = write!(sql, " WHERE {}", conds.join(" AND "));
        }
        sql
    }
}

fn columns<'v>(vars: impl Iterator<Item = &'v Var>, alias: Option<&str>) -> String {
    vars.map(|v| match alias {
        Some(t) => format!("{t}.{v}, "),
        None => format!("{v}, "),
    })
    .collect()
}

/// One query with a common table expression per view, in order.
pub fn emit_sql(vs: &ViewSet, catalog: &Catalog) -> String {
    let mut e = Emitter {
        catalog,
        reduced: false,
        next_alias: 0,
    };
    render(&mut e, vs, Vec::new())
}

/// As [`emit_sql`], reading each relation of `q` through a semi-join
/// reduced copy: the tuples that take part in some full join result.
pub fn emit_sql_reduced(vs: &ViewSet, q: &Query, catalog: &Catalog) -> String {
    let mut ctes = Vec::new();
    for (i, atom) in q.atoms().iter().enumerate() {
        let mut from = Vec::new();
        let mut conds = Vec::new();
        let mut first: Vec<(&Var, String)> = Vec::new();
        for (j, other) in q.atoms().iter().enumerate() {
            from.push(format!("{} j{j}", other.relation));
            for (k, v) in other.args.iter().enumerate() {
                let col = format!("j{j}.a{}", k + 1);
                match first.iter().find(|(w, _)| *w == v) {
                    Some((_, c)) => conds.push(format!("{c} = {col}")),
                    None => first.push((v, col)),
                }
            }
        }
        for k in 0..atom.args.len() {
            conds.push(format!("j{i}.a{} = {}.a{}", k + 1, atom.relation, k + 1));
        }
        ctes.push((
            format!("{}_reduced", atom.relation),
            format!(
                "SELECT * FROM {} WHERE EXISTS (SELECT 1 FROM {} WHERE {})",
                atom.relation,
                from.join(", "),
                conds.join(" AND ")
            ),
        ));
    }
    let mut e = Emitter {
        catalog,
        reduced: true,
        next_alias: 0,
    };
    render(&mut e, vs, ctes)
}

fn render(e: &mut Emitter<'_>, vs: &ViewSet, mut ctes: Vec<(String, String)>) -> String {
    for (name, plan) in &vs.views {
        ctes.push((name.clone(), e.select(plan)));
    }
    let main = e.select(&vs.main);
    let mut out = String::new();
    if !ctes.is_empty() {
        out.push_str("WITH\n");
        let defs: Vec<String> = ctes.iter().map(|(n, s)| format!("{n} AS (\n  {s}\n)")).collect();
        out.push_str(&defs.join(",\n"));
        out.push('\n');
    }
    out.push_str(&main);
    out.push_str(";\n");
    out
}
