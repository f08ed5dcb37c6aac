//! Min-cut-sets and enumeration of minimal query plans.
//!
//! The recursion alternates between two cases until single atoms remain:
//! a query whose atoms fall apart once the head variables are fixed becomes
//! a join over its components, and a connected query becomes a projection
//! over each of its minimal cut-sets. Head variables are constants
//! throughout.
//!
//! With schema knowledge the recursion first chases the functional
//! dependencies (every atom gains the closure of its variables), cuts only
//! where at least two resulting components hold a probabilistic relation,
//! and stops as soon as at most one probabilistic relation remains.

use std::collections::{BTreeMap, HashMap};

use crate::dissociation::delta_gamma;
use crate::plan::{safe_plan, Plan};
use crate::query::{fmt_var_set, partition, Atom, Catalog, Query, Var, VarSet};

/// A subquery: atom indices plus the variables currently treated as head.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Sub {
    pub atoms: Vec<usize>,
    pub head: VarSet,
}

/// The query as seen by the plan recursions.
pub(crate) struct Shape<'a> {
    query: &'a Query,
    /// Variables of each atom after the optional functional-dependency chase.
    var_sets: Vec<VarSet>,
    probabilistic: Vec<bool>,
    schema: bool,
}

impl<'a> Shape<'a> {
    pub fn new(query: &'a Query, catalog: &Catalog, schema: bool) -> Self {
        let var_sets = if schema {
            delta_gamma(query, catalog).atom_var_sets(query)
        } else {
            query.atoms().iter().map(Atom::vars).collect()
        };
        let probabilistic = query
            .atoms()
            .iter()
            .map(|a| !schema || catalog.is_probabilistic(&a.relation))
            .collect();
        Shape {
            query,
            var_sets,
            probabilistic,
            schema,
        }
    }

    pub fn root(&self) -> Sub {
        Sub {
            atoms: (0..self.query.atoms().len()).collect(),
            head: self.query.head().clone(),
        }
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.query.atoms()[i]
    }

    fn vars_of(&self, atoms: &[usize]) -> VarSet {
        atoms.iter().flat_map(|&i| self.var_sets[i].iter().cloned()).collect()
    }

    /// Variables of the subquery (after the chase).
    pub fn sub_vars(&self, sub: &Sub) -> VarSet {
        self.vars_of(&sub.atoms)
    }

    fn groups(&self, atoms: &[usize], removed: &VarSet) -> Vec<Vec<usize>> {
        partition(atoms, |i| &self.var_sets[i], removed)
    }

    /// Connected components once the head is fixed; `None` if connected.
    pub fn components(&self, sub: &Sub) -> Option<Vec<Sub>> {
        let groups = self.groups(&sub.atoms, &sub.head);
        (groups.len() > 1).then(|| {
            groups
                .into_iter()
                .map(|atoms| {
                    let head = sub.head.intersection(&self.vars_of(&atoms)).cloned().collect();
                    Sub { atoms, head }
                })
                .collect()
        })
    }

    fn probabilistic_count(&self, atoms: &[usize]) -> usize {
        atoms.iter().filter(|&&i| self.probabilistic[i]).count()
    }

    /// Recursion stops at single atoms, or with schema knowledge at subqueries
    /// holding at most one probabilistic relation.
    pub fn is_leaf(&self, sub: &Sub) -> bool {
        sub.atoms.len() == 1 || (self.schema && self.probabilistic_count(&sub.atoms) <= 1)
    }

    /// Scan-and-project for a single atom. With at most one probabilistic
    /// relation, the safe plan of the dissociation that extends every
    /// deterministic atom to all variables of the subquery and leaves the
    /// probabilistic one alone; it is exact and joins as late as possible.
    pub fn leaf_plan(&self, sub: &Sub) -> Plan {
        if let [single] = sub.atoms[..] {
            let atom = self.atom(single).clone();
            return self.project(sub, Plan::scan(atom));
        }
        let all = self.vars_of(&sub.atoms);
        let mut var_sets = self.var_sets.clone();
        for &i in &sub.atoms {
            if !self.probabilistic[i] {
                var_sets[i] = all.clone();
            }
        }
        safe_plan(self.query, &var_sets, &sub.atoms, &sub.head).expect("hierarchical by construction")
    }

    /// Projection onto the subquery's head, restricted to what the input carries.
    pub fn project(&self, sub: &Sub, input: Plan) -> Plan {
        let head = sub.head.intersection(&input.head()).cloned().collect();
        Plan::project(head, input)
    }

    /// Minimal cut-sets, or minimal probabilistic cut-sets with schema knowledge.
    pub fn top_sets(&self, sub: &Sub) -> Vec<VarSet> {
        let evars: Vec<Var> = self.vars_of(&sub.atoms).difference(&sub.head).cloned().collect();
        let probabilistic = &self.probabilistic;
        let schema = self.schema;
        minimal_cuts(&evars, |removed| {
            let removed: VarSet = removed.union(&sub.head).cloned().collect();
            let groups = self.groups(&sub.atoms, &removed);
            if schema {
                groups.iter().filter(|g| g.iter().any(|&i| probabilistic[i])).count() >= 2
            } else {
                groups.len() >= 2
            }
        })
    }

    /// Head of any plan for `sub`: its head restricted to the variables the
    /// scanned atoms actually carry.
    pub fn output_head(&self, sub: &Sub) -> VarSet {
        let carried: VarSet = sub.atoms.iter().flat_map(|&i| self.atom(i).vars()).collect();
        sub.head.intersection(&carried).cloned().collect()
    }

    /// Stable text naming a subquery, e.g. `R,S|{x}`.
    pub fn describe(&self, sub: &Sub) -> String {
        let names: Vec<&str> = sub.atoms.iter().map(|&i| self.atom(i).relation.as_str()).collect();
        format!("{}|{}", names.join(","), fmt_var_set(&sub.head))
    }

    pub fn extend(sub: &Sub, cut: &VarSet) -> Sub {
        Sub {
            atoms: sub.atoms.clone(),
            head: sub.head.union(cut).cloned().collect(),
        }
    }
}

/// Minimal sets of `candidates` accepted by `is_cut`, smallest first. The
/// accepted family must be upward closed; supersets of accepted sets are
/// skipped without testing.
fn minimal_cuts(candidates: &[Var], is_cut: impl Fn(&VarSet) -> bool) -> Vec<VarSet> {
    assert!(candidates.len() < 32, "too many existential variables");
    let n = candidates.len();
    let mut masks: Vec<u32> = (0..1u32 << n).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut accepted: Vec<u32> = Vec::new();
    for mask in masks {
        if accepted.iter().any(|&a| a & !mask == 0) {
            continue;
        }
        let set: VarSet = (0..n)
            .filter(|bit| mask & (1 << bit) != 0)
            .map(|bit| candidates[bit].clone())
            .collect();
        if is_cut(&set) {
            accepted.push(mask);
        }
    }
    accepted
        .into_iter()
        .map(|mask| {
            (0..n)
                .filter(|bit| mask & (1 << bit) != 0)
                .map(|bit| candidates[bit].clone())
                .collect()
        })
        .collect()
}

/// All minimal sets of existential variables whose removal disconnects `q`.
/// A query that is already disconnected yields `{∅}`; a single atom yields
/// no cut-set at all.
pub fn min_cuts(q: &Query) -> Vec<VarSet> {
    let shape = Shape::new(q, &Catalog::new(), false);
    shape.top_sets(&shape.root())
}

/// Minimal cut-sets leaving at least two components with a probabilistic
/// relation. Empty when the query holds fewer than two probabilistic atoms.
pub fn min_p_cuts(q: &Query, catalog: &Catalog) -> Vec<VarSet> {
    let probabilistic: Vec<bool> = q
        .atoms()
        .iter()
        .map(|a| catalog.is_probabilistic(&a.relation))
        .collect();
    let var_sets: Vec<VarSet> = q.atoms().iter().map(Atom::vars).collect();
    let atoms: Vec<usize> = (0..q.atoms().len()).collect();
    let evars: Vec<Var> = q.evars().into_iter().collect();
    minimal_cuts(&evars, |removed| {
        let removed: VarSet = removed.union(q.head()).cloned().collect();
        partition(&atoms, |i| &var_sets[i], &removed)
            .iter()
            .filter(|g| g.iter().any(|&i| probabilistic[i]))
            .count()
            >= 2
    })
}

/// Plans of all minimal safe dissociations of `q`, sorted by canonical key.
/// With `use_schema`, deterministic relations and functional dependencies
/// from the catalog collapse equivalent dissociations, and one plan per
/// minimal equivalence class is returned.
pub fn enumerate_minimal_plans(q: &Query, catalog: &Catalog, use_schema: bool) -> Vec<Plan> {
    let shape = Shape::new(q, catalog, use_schema);
    let mut memo = HashMap::new();
    let plans = minimal_plans(&shape, &shape.root(), &mut memo);
    let unique: BTreeMap<String, Plan> = plans.into_iter().map(|p| (p.key(), p)).collect();
    unique.into_values().collect()
}

fn minimal_plans(shape: &Shape<'_>, sub: &Sub, memo: &mut HashMap<Sub, Vec<Plan>>) -> Vec<Plan> {
    if let Some(found) = memo.get(sub) {
        return found.clone();
    }
    let plans = if shape.is_leaf(sub) {
        vec![shape.leaf_plan(sub)]
    } else if let Some(components) = shape.components(sub) {
        let choices: Vec<Vec<Plan>> = components.iter().map(|c| minimal_plans(shape, c, memo)).collect();
        let mut combos: Vec<Vec<Plan>> = vec![Vec::new()];
        for options in &choices {
            combos = combos
                .iter()
                .flat_map(|prefix| {
                    options.iter().map(move |p| {
                        let mut next = prefix.clone();
                        next.push(p.clone());
                        next
                    })
                })
                .collect();
        }
        combos.into_iter().map(Plan::join).collect()
    } else {
        shape
            .top_sets(sub)
            .iter()
            .flat_map(|cut| {
                let inner = Shape::extend(sub, cut);
                minimal_plans(shape, &inner, memo)
                    .into_iter()
                    .map(|p| shape.project(sub, p))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    memo.insert(sub.clone(), plans.clone());
    plans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissociation::{is_safe_dissociation, Dissociation};
    use crate::plan::{is_safe_plan, plan_to_dissociation};
    use crate::query::{parse_catalog, parse_query_unchecked, vars};

    fn q(text: &str) -> Query {
        parse_query_unchecked(text).unwrap()
    }

    #[test]
    fn min_cut_examples() {
        assert_eq!(
            min_cuts(&q("q() :- R(x), S(x,y), T(y)")),
            vec![vars(["x"]), vars(["y"])]
        );
        assert_eq!(min_cuts(&q("q() :- R(x), S(y)")), vec![VarSet::new()]);
        assert_eq!(min_cuts(&q("q() :- R(x), S(x)")), vec![vars(["x"])]);
        assert!(min_cuts(&q("q() :- R(x,y)")).is_empty());
    }

    #[test]
    fn min_cuts_are_minimal() {
        let query = q("q() :- R(x,y), S(y,z), T(z,u), U(u,x), V(x,z)");
        let cuts = min_cuts(&query);
        assert!(!cuts.is_empty());
        let var_sets: Vec<VarSet> = query.atoms().iter().map(Atom::vars).collect();
        let atoms: Vec<usize> = (0..5).collect();
        let disconnects = |s: &VarSet| partition(&atoms, |i| &var_sets[i], s).len() >= 2;
        for cut in &cuts {
            assert!(disconnects(cut));
            for v in cut {
                let mut smaller = cut.clone();
                smaller.remove(v);
                assert!(!disconnects(&smaller), "{cut:?} not minimal");
            }
        }
    }

    #[test]
    fn min_p_cut_examples() {
        let query = q("q() :- R(x), S(x,y), T(y)");
        let with_det_t = parse_catalog("R/1 prob\nS/2 prob\nT/1 det").unwrap();
        assert_eq!(min_p_cuts(&query, &with_det_t), vec![vars(["x"])]);
        let all_prob = parse_catalog("R/1\nS/2\nT/1").unwrap();
        assert_eq!(min_p_cuts(&query, &all_prob), min_cuts(&query));
        let one_prob = parse_catalog("R/1 det\nS/2 prob\nT/1 det").unwrap();
        assert!(min_p_cuts(&query, &one_prob).is_empty());
    }

    #[test]
    fn chain_with_head_has_two_plans() {
        let query = q("q(z) :- R(z,x), S(x,y), T(y)");
        let plans = enumerate_minimal_plans(&query, &Catalog::new(), false);
        assert_eq!(plans.len(), 2);
        let deltas: Vec<Dissociation> = plans.iter().map(|p| plan_to_dissociation(p, &query).unwrap()).collect();
        assert!(deltas.contains(&Dissociation::new(vec![VarSet::new(), VarSet::new(), vars(["x"])])));
        assert!(deltas.contains(&Dissociation::new(vec![vars(["y"]), VarSet::new(), VarSet::new()])));
    }

    #[test]
    fn deterministic_relation_leaves_one_plan() {
        let query = q("q() :- R(x), S(x,y), T(y)");
        let catalog = parse_catalog("R/1 prob\nS/2 prob\nT/1 det").unwrap();
        let plans = enumerate_minimal_plans(&query, &catalog, true);
        assert_eq!(plans.len(), 1);
        assert_eq!(
            plan_to_dissociation(&plans[0], &query).unwrap(),
            Dissociation::new(vec![VarSet::new(), VarSet::new(), vars(["x"])])
        );
        // without schema knowledge both plans come back
        assert_eq!(enumerate_minimal_plans(&query, &catalog, false).len(), 2);
    }

    #[test]
    fn two_deterministic_relations_give_top_plan() {
        let query = q("q() :- R(x), S(x,y), T(y)");
        let catalog = parse_catalog("R/1 det\nS/2 prob\nT/1 det").unwrap();
        let plans = enumerate_minimal_plans(&query, &catalog, true);
        assert_eq!(plans.len(), 1);
        assert_eq!(
            plan_to_dissociation(&plans[0], &query).unwrap(),
            Dissociation::top(&query)
        );
    }

    #[test]
    fn functional_dependency_makes_chain_safe() {
        let query = q("q() :- R(x), S(x,y), T(y)");
        let catalog = parse_catalog("R/1\nS/2\nT/1\nfd S: 1 -> 2").unwrap();
        let plans = enumerate_minimal_plans(&query, &catalog, true);
        assert_eq!(plans.len(), 1);
        let delta = plan_to_dissociation(&plans[0], &query).unwrap();
        assert_eq!(
            delta,
            Dissociation::new(vec![vars(["y"]), VarSet::new(), VarSet::new()])
        );
    }

    #[test]
    fn safe_query_has_single_safe_plan() {
        let query = q("q(z) :- R(z,x), S(x,y), K(x,y)");
        let plans = enumerate_minimal_plans(&query, &Catalog::new(), false);
        assert_eq!(plans.len(), 1);
        assert!(is_safe_plan(&plans[0]));
    }

    #[test]
    fn partial_order_example_has_two_minimal_plans() {
        let query = q("q() :- R(x), S(x), T(x,y), U(y)");
        let plans = enumerate_minimal_plans(&query, &Catalog::new(), false);
        let mut deltas: Vec<String> = plans
            .iter()
            .map(|p| plan_to_dissociation(p, &query).unwrap().to_string())
            .collect();
        deltas.sort();
        assert_eq!(deltas, vec!["({y}, {y}, ∅, ∅)", "(∅, ∅, ∅, {x})"]);
        for p in &plans {
            assert!(is_safe_dissociation(&query, &plan_to_dissociation(p, &query).unwrap()));
        }
    }

    #[test]
    fn optimization_example_has_six_plans() {
        let query = q("q() :- R(x,z), S(y,u), T(z), U(u), M(x,y,z,u)");
        assert_eq!(enumerate_minimal_plans(&query, &Catalog::new(), false).len(), 6);
    }
}
