//! In-memory evaluation of plans under extensional score semantics, plus
//! deterministic answers and lineage extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::db::{format_answer, Database, Relation, TupleId, Value};
use crate::enumerate::enumerate_minimal_plans;
use crate::error::EngineError;
use crate::optimize::{semijoin_reduce, shared_view_plan, single_plan, ViewSet};
use crate::plan::Plan;
use crate::query::{Atom, Catalog, Query, Var};

/// Scored answers of a plan: one row per distinct head tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRelation {
    /// Head variables in sorted order; row values follow this order.
    pub vars: Vec<Var>,
    pub rows: BTreeMap<Vec<Value>, f64>,
}

impl ScoredRelation {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, answer: &[Value]) -> Option<f64> {
        self.rows.get(answer).copied()
    }

    /// `answer<TAB>score` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (answer, score) in &self.rows {
            let _ = writeln!(out, "{}\t{score}", format_answer(answer));
        }
        out
    }

    fn position(&self, v: &Var) -> usize {
        self.vars.binary_search(v).expect("variable in relation")
    }
}

/// Views already materialised, by name.
pub type ViewEnv = BTreeMap<String, ScoredRelation>;

/// Score of every answer of `p` on `db`.
pub fn eval_plan_score(p: &Plan, db: &Database) -> Result<ScoredRelation, EngineError> {
    eval_with_views(p, db, &ViewEnv::new())
}

/// As [`eval_plan_score`], resolving view references through `views`.
pub fn eval_with_views(p: &Plan, db: &Database, views: &ViewEnv) -> Result<ScoredRelation, EngineError> {
    match p {
        Plan::Scan(atom) => scan(atom, db.get(&atom.relation)?),
        Plan::Join(children) => {
            let mut inputs = children
                .iter()
                .map(|c| eval_with_views(c, db, views))
                .collect::<Result<Vec<_>, _>>()?;
            let mut acc = inputs.remove(0);
            while !inputs.is_empty() {
                // prefer a partner that shares variables, to avoid cross products
                let next = inputs
                    .iter()
                    .position(|r| r.vars.iter().any(|v| acc.vars.binary_search(v).is_ok()))
                    .unwrap_or(0);
                acc = join(&acc, &inputs.remove(next));
            }
            Ok(acc)
        }
        Plan::Project { head, input } => {
            let input = eval_with_views(input, db, views)?;
            let vars: Vec<Var> = head.iter().cloned().collect();
            let positions: Vec<usize> = vars.iter().map(|v| input.position(v)).collect();
            let mut miss: BTreeMap<Vec<Value>, f64> = BTreeMap::new();
            for (row, score) in &input.rows {
                let key = positions.iter().map(|&i| row[i].clone()).collect();
                *miss.entry(key).or_insert(1.0) *= 1.0 - score;
            }
            let rows = miss.into_iter().map(|(k, m)| (k, 1.0 - m)).collect();
            Ok(ScoredRelation { vars, rows })
        }
        Plan::Min(children) => {
            let mut results = children.iter().map(|c| eval_with_views(c, db, views));
            let mut acc = results.next().expect("min has children")?;
            for next in results {
                acc = min(acc, next?)?;
            }
            Ok(acc)
        }
        Plan::View { name, .. } => views
            .get(name)
            .cloned()
            .ok_or_else(|| EngineError::UnknownView(name.clone())),
    }
}

fn scan(atom: &Atom, rel: &Relation) -> Result<ScoredRelation, EngineError> {
    let vars: Vec<Var> = atom.vars().into_iter().collect();
    if rel.arity() != atom.args.len() {
        return Err(EngineError::UnknownRelation(format!(
            "{} (arity {} used with {} arguments)",
            rel.name(),
            rel.arity(),
            atom.args.len()
        )));
    }
    let mut rows = BTreeMap::new();
    'tuples: for t in rel.tuples() {
        let mut row: Vec<Option<&Value>> = vec![None; vars.len()];
        for (arg, value) in atom.args.iter().zip(&t.values) {
            let slot = &mut row[vars.binary_search(arg).expect("own variable")];
            match slot {
                Some(seen) if *seen != value => continue 'tuples,
                _ => *slot = Some(value),
            }
        }
        let row: Vec<Value> = row.into_iter().map(|v| v.expect("bound").clone()).collect();
        rows.insert(row, t.p);
    }
    Ok(ScoredRelation { vars, rows })
}

fn join(a: &ScoredRelation, b: &ScoredRelation) -> ScoredRelation {
    let shared: Vec<&Var> = a.vars.iter().filter(|v| b.vars.binary_search(v).is_ok()).collect();
    let key_a: Vec<usize> = shared.iter().map(|v| a.position(v)).collect();
    let key_b: Vec<usize> = shared.iter().map(|v| b.position(v)).collect();
    let mut vars: Vec<Var> = a.vars.iter().chain(&b.vars).cloned().collect();
    vars.sort();
    vars.dedup();
    // for each output column: take it from `a` if present, else from `b`
    let picks: Vec<(bool, usize)> = vars
        .iter()
        .map(|v| match a.vars.binary_search(v) {
            Ok(i) => (true, i),
            Err(_) => (false, b.position(v)),
        })
        .collect();
    let mut index: HashMap<Vec<&Value>, Vec<(&Vec<Value>, f64)>> = HashMap::new();
    for (row, &s) in &b.rows {
        index
            .entry(key_b.iter().map(|&i| &row[i]).collect())
            .or_default()
            .push((row, s));
    }
    let mut rows = BTreeMap::new();
    for (ra, &sa) in &a.rows {
        let key: Vec<&Value> = key_a.iter().map(|&i| &ra[i]).collect();
        for (rb, sb) in index.get(&key).into_iter().flatten() {
            let row = picks
                .iter()
                .map(|&(from_a, i)| if from_a { ra[i].clone() } else { rb[i].clone() })
                .collect();
            rows.insert(row, sa * sb);
        }
    }
    ScoredRelation { vars, rows }
}

fn min(a: ScoredRelation, b: ScoredRelation) -> Result<ScoredRelation, EngineError> {
    let same = a.vars == b.vars && a.rows.len() == b.rows.len() && a.rows.keys().eq(b.rows.keys());
    if !same {
        return Err(EngineError::MinSupportMismatch {
            left: a.rows.len(),
            right: b.rows.len(),
        });
    }
    let rows = a
        .rows
        .into_iter()
        .zip(b.rows.into_values())
        .map(|((k, x), y)| (k, x.min(y)))
        .collect();
    Ok(ScoredRelation { vars: a.vars, rows })
}

/// Materialises the views in order, then evaluates the main plan.
pub fn eval_viewset(vs: &ViewSet, db: &Database) -> Result<ScoredRelation, EngineError> {
    let mut env = ViewEnv::new();
    for (name, plan) in &vs.views {
        let rel = eval_with_views(plan, db, &env)?;
        env.insert(name.clone(), rel);
    }
    eval_with_views(&vs.main, db, &env)
}

/// Evaluation route for [`propagation_score`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Every minimal plan separately, then the per-answer minimum.
    AllPlans,
    /// One plan with the minimum pushed down.
    Opt1,
    /// The single plan with shared subplans materialised as views.
    Opt12,
    /// As `Opt12`, on a semi-join reduced database.
    Opt123,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::AllPlans, Strategy::Opt1, Strategy::Opt12, Strategy::Opt123];
}

/// The propagation score of every answer of `q`.
pub fn propagation_score(
    q: &Query,
    db: &Database,
    catalog: &Catalog,
    strategy: Strategy,
    use_schema: bool,
) -> Result<ScoredRelation, EngineError> {
    match strategy {
        Strategy::AllPlans => {
            let plans = enumerate_minimal_plans(q, catalog, use_schema);
            let mut scores = plans.iter().map(|p| eval_plan_score(p, db));
            let mut acc = scores.next().expect("at least one minimal plan")?;
            for next in scores {
                acc = min(acc, next?)?;
            }
            Ok(acc)
        }
        Strategy::Opt1 => eval_plan_score(&single_plan(q, catalog, use_schema), db),
        Strategy::Opt12 => eval_viewset(&shared_view_plan(q, catalog, use_schema), db),
        Strategy::Opt123 => {
            let reduced = semijoin_reduce(db, q)?;
            eval_viewset(&shared_view_plan(q, catalog, use_schema), &reduced)
        }
    }
}

type Visit<'a> = dyn FnMut(&[Option<Value>], &[TupleId]) -> bool + 'a;

/// Walks every satisfying valuation of `q`, handing the matched tuples (one
/// per atom, in atom order) to `visit`. Returning `false` stops the walk.
fn for_each_match(
    q: &Query,
    db: &Database,
    mut visit: impl FnMut(&[Option<Value>], &[TupleId]) -> bool,
) -> Result<(), EngineError> {
    let all: Vec<Var> = q.vars().into_iter().collect();
    let slot = |v: &Var| all.binary_search(v).expect("query variable");
    let rels: Vec<&Relation> = q
        .atoms()
        .iter()
        .map(|a| db.get(&a.relation))
        .collect::<Result<_, _>>()?;

    // greedy order: most already-bound variables first, then smallest relation
    let mut order = Vec::new();
    let mut bound = vec![false; all.len()];
    let mut left: Vec<usize> = (0..q.atoms().len()).collect();
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .max_by_key(|(_, &i)| {
                let hits = q.atoms()[i].args.iter().filter(|v| bound[slot(v)]).count();
                (hits, std::cmp::Reverse(rels[i].len()), std::cmp::Reverse(i))
            })
            .expect("non-empty");
        let i = left.remove(pos);
        for v in &q.atoms()[i].args {
            bound[slot(v)] = true;
        }
        order.push(i);
    }

    // per step: argument slots, positions bound earlier, and an index on them
    struct Step<'d> {
        atom: usize,
        slots: Vec<usize>,
        keyed: Vec<usize>,
        index: HashMap<Vec<&'d Value>, Vec<usize>>,
    }
    let mut seen = vec![false; all.len()];
    let mut steps = Vec::new();
    for &i in &order {
        let slots: Vec<usize> = q.atoms()[i].args.iter().map(slot).collect();
        let keyed: Vec<usize> = (0..slots.len()).filter(|&k| seen[slots[k]]).collect();
        let mut index: HashMap<Vec<&Value>, Vec<usize>> = HashMap::new();
        for (row, t) in rels[i].tuples().iter().enumerate() {
            index
                .entry(keyed.iter().map(|&k| &t.values[k]).collect())
                .or_default()
                .push(row);
        }
        for &s in &slots {
            seen[s] = true;
        }
        steps.push(Step {
            atom: i,
            slots,
            keyed,
            index,
        });
    }

    fn walk(
        depth: usize,
        steps: &[Step<'_>],
        rels: &[&Relation],
        binding: &mut Vec<Option<Value>>,
        ids: &mut Vec<Option<TupleId>>,
        visit: &mut Visit<'_>,
    ) -> bool {
        let Some(step) = steps.get(depth) else {
            let ids: Vec<TupleId> = ids.iter().map(|t| t.clone().expect("matched")).collect();
            return visit(binding, &ids);
        };
        let owned: Vec<Value> = step
            .keyed
            .iter()
            .map(|&k| binding[step.slots[k]].clone().expect("bound"))
            .collect();
        let key: Vec<&Value> = owned.iter().collect();
        let Some(rows) = step.index.get(&key) else {
            return true;
        };
        let rel = rels[step.atom];
        for &row in rows {
            let t = &rel.tuples()[row];
            let mut fresh = Vec::new();
            let mut ok = true;
            for (k, &s) in step.slots.iter().enumerate() {
                match &binding[s] {
                    Some(v) if *v != t.values[k] => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        binding[s] = Some(t.values[k].clone());
                        fresh.push(s);
                    }
                }
            }
            if ok {
                ids[step.atom] = Some(rel.tuple_id(t));
                if !walk(depth + 1, steps, rels, binding, ids, visit) {
                    return false;
                }
            }
            for s in fresh {
                binding[s] = None;
            }
        }
        true
    }

    let mut binding = vec![None; all.len()];
    let mut ids = vec![None; q.atoms().len()];
    walk(0, &steps, &rels, &mut binding, &mut ids, &mut visit);
    Ok(())
}

fn head_slots(q: &Query) -> Vec<usize> {
    let all: Vec<Var> = q.vars().into_iter().collect();
    q.head()
        .iter()
        .map(|v| all.binary_search(v).expect("head variable"))
        .collect()
}

/// Ordinary conjunctive-query answers, ignoring probabilities.
pub fn eval_deterministic(q: &Query, db: &Database) -> Result<BTreeSet<Vec<Value>>, EngineError> {
    let slots = head_slots(q);
    let mut answers = BTreeSet::new();
    for_each_match(q, db, |binding, _| {
        answers.insert(slots.iter().map(|&s| binding[s].clone().expect("bound")).collect());
        true
    })?;
    Ok(answers)
}

/// A monotone DNF: a disjunction of conjunctions of variables.
pub type Dnf<V> = Vec<BTreeSet<V>>;

/// Per-answer lineage formulas over tuple identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lineage {
    pub vars: Vec<Var>,
    pub answers: BTreeMap<Vec<Value>, Dnf<TupleId>>,
}

impl Lineage {
    pub fn monomial_count(&self) -> usize {
        self.answers.values().map(Vec::len).sum()
    }

    /// One line per answer: `answer<TAB>monomial;monomial`, each monomial a
    /// comma-joined list of tuple identifiers.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (answer, dnf) in &self.answers {
            let monomials: Vec<String> = dnf
                .iter()
                .map(|m| m.iter().map(TupleId::to_string).collect::<Vec<_>>().join(","))
                .collect();
            let _ = writeln!(out, "{}\t{}", format_answer(answer), monomials.join(";"));
        }
        out
    }
}

/// Default monomial cap for [`lineage`].
pub const DEFAULT_LINEAGE_CAP: usize = 1_000_000;

/// The lineage of every answer of `q`. Fails once more than `cap` monomials
/// have been produced.
pub fn lineage(q: &Query, db: &Database, cap: usize) -> Result<Lineage, EngineError> {
    let slots = head_slots(q);
    let mut answers: BTreeMap<Vec<Value>, BTreeSet<BTreeSet<TupleId>>> = BTreeMap::new();
    let mut count = 0usize;
    let mut overflow = false;
    for_each_match(q, db, |binding, ids| {
        count += 1;
        if count > cap {
            overflow = true;
            return false;
        }
        let answer = slots.iter().map(|&s| binding[s].clone().expect("bound")).collect();
        answers.entry(answer).or_default().insert(ids.iter().cloned().collect());
        true
    })?;
    if overflow {
        return Err(EngineError::LineageTooLarge { limit: cap });
    }
    Ok(Lineage {
        vars: q.head().iter().cloned().collect(),
        answers: answers.into_iter().map(|(a, f)| (a, f.into_iter().collect())).collect(),
    })
}
