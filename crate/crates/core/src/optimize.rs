//! Evaluating all minimal plans at once: one plan with the minimum pushed
//! towards the leaves, shared subplans materialised as views, and a
//! semi-join reduction of the input.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::db::{Database, Tuple, Value};
use crate::enumerate::{Shape, Sub};
use crate::error::EngineError;
use crate::plan::Plan;
use crate::query::{Catalog, Query, Var, VarSet};

/// Single plan equivalent to the minimum over all minimal plans. Where the
/// recursion has a choice of cut-sets, a `Min` node takes the per-tuple
/// minimum over the alternatives.
pub fn single_plan(q: &Query, catalog: &Catalog, use_schema: bool) -> Plan {
    let shape = Shape::new(q, catalog, use_schema);
    let mut memo = HashMap::new();
    expand(&shape, &shape.root(), &mut |sub| cached(&shape, sub, &mut memo))
}

fn cached(shape: &Shape<'_>, sub: &Sub, memo: &mut HashMap<Sub, Plan>) -> Plan {
    if let Some(p) = memo.get(sub) {
        return p.clone();
    }
    let p = expand(shape, sub, &mut |inner| cached(shape, inner, memo));
    memo.insert(sub.clone(), p.clone());
    p
}

/// One level of the single-plan recursion; `child` builds the subplans.
fn expand(shape: &Shape<'_>, sub: &Sub, child: &mut dyn FnMut(&Sub) -> Plan) -> Plan {
    if shape.is_leaf(sub) {
        return shape.leaf_plan(sub);
    }
    if let Some(components) = shape.components(sub) {
        return Plan::join(components.iter().map(child).collect());
    }
    let branches = shape
        .top_sets(sub)
        .iter()
        .map(|cut| shape.project(sub, child(&Shape::extend(sub, cut))))
        .collect();
    Plan::min(branches)
}

/// Named view definitions, each referring only to earlier ones, and the
/// main plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub views: Vec<(String, Plan)>,
    pub main: Plan,
}

impl fmt::Display for ViewSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, plan) in &self.views {
            writeln!(f, "{name} :=")?;
            for line in plan.to_string().lines() {
                writeln!(f, "  {line}")?;
            }
        }
        if !self.views.is_empty() {
            writeln!(f, "main :=")?;
        }
        write!(f, "{}", self.main)
    }
}

/// The single plan with every subquery reached more than once turned into
/// a view. Subqueries are identified by their atoms and head variables.
pub fn shared_view_plan(q: &Query, catalog: &Catalog, use_schema: bool) -> ViewSet {
    let shape = Shape::new(q, catalog, use_schema);
    let mut seen = HashSet::new();
    let mut shared = BTreeSet::new();
    find_shared(&shape, &shape.root(), &mut seen, &mut shared);

    // Children have fewer existential variables than their parents, so this
    // order defines every view before its first use.
    let mut order: Vec<Sub> = shared.into_iter().collect();
    order.sort_by_cached_key(|s| {
        let vars = shape.sub_vars(s);
        let evars = vars.difference(&s.head).count();
        (evars, vars.len(), shape.describe(s))
    });
    let names: HashMap<Sub, (String, VarSet)> = order
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), (format!("V{}", i + 1), shape.output_head(s))))
        .collect();
    let views = order
        .iter()
        .map(|s| (names[s].0.clone(), expand(&shape, s, &mut |c| reuse(&shape, c, &names))))
        .collect();
    let main = reuse(&shape, &shape.root(), &names);
    ViewSet { views, main }
}

fn find_shared(shape: &Shape<'_>, sub: &Sub, seen: &mut HashSet<Sub>, shared: &mut BTreeSet<Sub>) {
    if !shape.is_leaf(sub) {
        if let Some(components) = shape.components(sub) {
            for c in &components {
                find_shared(shape, c, seen, shared);
            }
            return;
        }
    }
    let trivial = sub.atoms.len() == 1 && shape.sub_vars(sub).is_subset(&sub.head);
    if trivial || shared.contains(sub) {
        return;
    }
    if !seen.insert(sub.clone()) {
        shared.insert(sub.clone());
    }
    if shape.is_leaf(sub) {
        return;
    }
    for cut in shape.top_sets(sub) {
        find_shared(shape, &Shape::extend(sub, &cut), seen, shared);
    }
}

fn reuse(shape: &Shape<'_>, sub: &Sub, names: &HashMap<Sub, (String, VarSet)>) -> Plan {
    match names.get(sub) {
        Some((name, head)) => Plan::View {
            name: name.clone(),
            head: head.clone(),
        },
        None => expand(shape, sub, &mut |c| reuse(shape, c, names)),
    }
}

/// Removes tuples that cannot take part in any answer of `q`, by pairwise
/// semi-joins between atoms that share variables until nothing changes (at
/// most m² passes). Exact for acyclic queries, a sound partial reduction
/// otherwise. Row identifiers of surviving tuples are kept.
pub fn semijoin_reduce(db: &Database, q: &Query) -> Result<Database, EngineError> {
    let mut out = db.clone();
    let atoms = q.atoms();
    for atom in atoms {
        let rel = out
            .relation_mut(&atom.relation)
            .ok_or_else(|| EngineError::UnknownRelation(atom.relation.clone()))?;
        rel.retain(|t| consistent(&atom.args, t));
    }
    let m = atoms.len();
    for _ in 0..m * m {
        let mut changed = false;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let shared: Vec<Var> = atoms[i].vars().intersection(&atoms[j].vars()).cloned().collect();
                if shared.is_empty() {
                    continue;
                }
                let pos_i = first_positions(&atoms[i].args, &shared);
                let pos_j = first_positions(&atoms[j].args, &shared);
                let keys: HashSet<Vec<Value>> = out
                    .get(&atoms[j].relation)?
                    .tuples()
                    .iter()
                    .map(|t| pos_j.iter().map(|&k| t.values[k].clone()).collect())
                    .collect();
                let rel = out.relation_mut(&atoms[i].relation).expect("checked above");
                let before = rel.len();
                rel.retain(|t| keys.contains(&pos_i.iter().map(|&k| t.values[k].clone()).collect::<Vec<_>>()));
                changed |= rel.len() != before;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(out)
}

fn first_positions(args: &[Var], wanted: &[Var]) -> Vec<usize> {
    wanted
        .iter()
        .map(|v| args.iter().position(|a| a == v).expect("shared variable"))
        .collect()
}

/// Does the tuple agree on repeated variables of the atom?
fn consistent(args: &[Var], t: &Tuple) -> bool {
    let mut bound: BTreeMap<&Var, &Value> = BTreeMap::new();
    args.iter()
        .zip(&t.values)
        .all(|(v, x)| *bound.entry(v).or_insert(x) == x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db::Relation;
    use crate::engine::{eval_plan_score, eval_viewset};
    use crate::enumerate::enumerate_minimal_plans;
    use crate::plan::is_safe_plan;
    use crate::query::parse_query_unchecked;

    fn q(text: &str) -> Query {
        parse_query_unchecked(text).unwrap()
    }

    fn is_min(p: &Plan) -> bool {
        matches!(p, Plan::Min(_))
    }

    #[test]
    fn safe_query_single_plan_is_the_safe_plan() {
        let query = q("q(z) :- R(z,x), S(x,y), K(x,y)");
        let single = single_plan(&query, &Catalog::new(), false);
        assert_eq!(single.count_nodes(&is_min), 0);
        assert!(is_safe_plan(&single));
        assert_eq!(vec![single], enumerate_minimal_plans(&query, &Catalog::new(), false));
        let vs = shared_view_plan(&query, &Catalog::new(), false);
        assert!(vs.views.is_empty());
    }

    #[test]
    fn chain_single_plan_has_min_over_two_cuts() {
        let single = single_plan(&q("q() :- R(x), S(x,y), T(y)"), &Catalog::new(), false);
        match &single {
            Plan::Min(branches) => assert_eq!(branches.len(), 2),
            other => panic!("expected min at the root, got {other}"),
        }
    }

    #[test]
    fn optimization_example_reuses_views() {
        let query = q("q() :- R(x,z), S(y,u), T(z), U(u), M(x,y,z,u)");
        let single = single_plan(&query, &Catalog::new(), false);
        assert!(single.count_nodes(&is_min) >= 1);
        let vs = shared_view_plan(&query, &Catalog::new(), false);
        assert!(vs.views.len() >= 3, "{vs}");
        // every view is defined before it is referenced
        let mut defined = HashSet::new();
        for (name, plan) in &vs.views {
            for r in view_refs(plan) {
                assert!(defined.contains(&r), "{name} uses {r} before definition");
            }
            defined.insert(name.clone());
        }
        let used_in_main = view_refs(&vs.main);
        let nested: Vec<&String> = vs
            .views
            .iter()
            .filter(|(_, p)| !view_refs(p).is_empty())
            .map(|(n, _)| n)
            .collect();
        assert!(!nested.is_empty(), "{vs}");
        for (name, plan) in &vs.views {
            if nested.contains(&name) {
                for r in view_refs(plan) {
                    assert!(used_in_main.contains(&r), "{r} shared by {name} and main\n{vs}");
                }
            }
        }
    }

    fn view_refs(p: &Plan) -> BTreeSet<String> {
        match p {
            Plan::View { name, .. } => BTreeSet::from([name.clone()]),
            Plan::Scan(_) => BTreeSet::new(),
            Plan::Project { input, .. } => view_refs(input),
            Plan::Join(cs) | Plan::Min(cs) => cs.iter().flat_map(view_refs).collect(),
        }
    }

    fn chain_db() -> Database {
        let mut db = Database::new();
        let mut r = Relation::new("R", 1, true);
        r.push(vec![Value::Int(1)], 0.5).unwrap();
        r.push(vec![Value::Int(9)], 0.5).unwrap();
        let mut s = Relation::new("S", 2, true);
        s.push(vec![Value::Int(1), Value::Int(2)], 0.4).unwrap();
        s.push(vec![Value::Int(1), Value::Int(3)], 0.6).unwrap();
        s.push(vec![Value::Int(7), Value::Int(2)], 0.6).unwrap();
        let mut t = Relation::new("T", 1, true);
        t.push(vec![Value::Int(2)], 0.7).unwrap();
        db.insert(r);
        db.insert(s);
        db.insert(t);
        db
    }

    #[test]
    fn semijoin_removes_dangling_tuples() {
        let query = q("q() :- R(x), S(x,y), T(y)");
        let db = chain_db();
        let reduced = semijoin_reduce(&db, &query).unwrap();
        assert_eq!(reduced.get("R").unwrap().len(), 1);
        assert_eq!(reduced.get("S").unwrap().len(), 1);
        assert_eq!(reduced.get("S").unwrap().tuples()[0].row, 0);
        assert_eq!(semijoin_reduce(&reduced, &query).unwrap(), reduced);
        for p in enumerate_minimal_plans(&query, &Catalog::new(), false) {
            assert_eq!(
                eval_plan_score(&p, &db).unwrap(),
                eval_plan_score(&p, &reduced).unwrap()
            );
        }
    }

    #[test]
    fn view_evaluation_matches_single_plan() {
        let query = q("q() :- R(x), S(x,y), T(y)");
        let db = chain_db();
        let single = eval_plan_score(&single_plan(&query, &Catalog::new(), false), &db).unwrap();
        let views = eval_viewset(&shared_view_plan(&query, &Catalog::new(), false), &db).unwrap();
        assert_eq!(single, views);
    }
}
