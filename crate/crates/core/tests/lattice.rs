//! Exhaustive checks of plan enumeration against the full dissociation
//! lattice of small random queries.

use std::collections::BTreeSet;

use dissoc_core::dissociation::{all_dissociations, compare, fd_closure, is_safe_dissociation, Dissociation, Order};
use dissoc_core::enumerate::enumerate_minimal_plans;
use dissoc_core::plan::{dissociation_to_plan, is_safe_plan, plan_to_dissociation};
use dissoc_core::query::{is_hierarchical, Catalog, Query, VarSet};
use dissoc_core::random::{random_query, rng, QueryShape};
use rand::Rng;

fn strictly_below(a: &Dissociation, b: &Dissociation, order: Order, q: &Query, c: &Catalog) -> bool {
    compare(a, b, order, q, c) && !compare(b, a, order, q, c)
}

fn minimal_safe(q: &Query, c: &Catalog, order: Order) -> Vec<Dissociation> {
    let safe: Vec<Dissociation> = all_dissociations(q)
        .into_iter()
        .filter(|d| is_safe_dissociation(q, d))
        .collect();
    safe.iter()
        .filter(|d| !safe.iter().any(|other| strictly_below(other, d, order, q, c)))
        .cloned()
        .collect()
}

#[test]
fn enumeration_matches_minimal_safe_dissociations() {
    let shape = QueryShape {
        max_atoms: 4,
        max_vars: 4,
        max_arity: 3,
        head_prob: 0.2,
        det_prob: 0.0,
    };
    let mut r = rng(7);
    for _ in 0..300 {
        let (q, catalog) = random_query(&mut r, &shape);
        let expected: BTreeSet<Dissociation> = minimal_safe(&q, &catalog, Order::Plain).into_iter().collect();
        let plans = enumerate_minimal_plans(&q, &catalog, false);
        let got: BTreeSet<Dissociation> = plans.iter().map(|p| plan_to_dissociation(p, &q).unwrap()).collect();
        assert_eq!(got, expected, "{q}");
        assert_eq!(got.len(), plans.len(), "{q}: two plans share a dissociation");
        for p in &plans {
            let d = plan_to_dissociation(p, &q).unwrap();
            assert_eq!(&dissociation_to_plan(&q, &d).unwrap(), p, "{q}");
        }
        if is_hierarchical(&q) {
            assert_eq!(plans.len(), 1, "{q}");
            assert!(is_safe_plan(&plans[0]), "{q}");
        }
    }
}

fn add_random_fds(r: &mut impl Rng, catalog: &Catalog) -> Catalog {
    let mut out = Catalog::new();
    for decl in catalog.relations() {
        out.add_relation(&decl.name, decl.arity, decl.probabilistic).unwrap();
        if decl.arity >= 2 && r.gen_bool(0.3) {
            let lhs = r.gen_range(0..decl.arity);
            let rhs = (lhs + 1 + r.gen_range(0..decl.arity - 1)) % decl.arity;
            out.add_fd(&decl.name, vec![lhs], vec![rhs]).unwrap();
        }
    }
    out
}

/// Probabilistic part of a dissociation after chasing every dissociated atom
/// with the FDs. Two dissociations with the same chase have the same
/// probability on every instance satisfying the FDs.
fn chased(d: &Dissociation, q: &Query, c: &Catalog) -> Vec<Option<VarSet>> {
    q.atoms()
        .iter()
        .zip(d.sets())
        .map(|(atom, y)| {
            c.is_probabilistic(&atom.relation).then(|| {
                let own = atom.vars();
                let all: VarSet = own.union(y).chain(q.head()).cloned().collect();
                fd_closure(&all, q, c)
                    .difference(&own)
                    .filter(|v| !q.head().contains(*v))
                    .cloned()
                    .collect()
            })
        })
        .collect()
}

fn chased_le(a: &[Option<VarSet>], b: &[Option<VarSet>]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (Some(x), Some(y)) => x.is_subset(y),
        _ => true,
    })
}

#[test]
fn schema_enumeration_returns_one_plan_per_minimal_class() {
    let shape = QueryShape {
        max_atoms: 4,
        max_vars: 4,
        max_arity: 3,
        head_prob: 0.15,
        det_prob: 0.35,
    };
    let mut r = rng(11);
    for _ in 0..300 {
        let (q, base) = random_query(&mut r, &shape);
        let catalog = add_random_fds(&mut r, &base);
        let safe: Vec<Vec<Option<VarSet>>> = all_dissociations(&q)
            .into_iter()
            .filter(|d| is_safe_dissociation(&q, d))
            .map(|d| chased(&d, &q, &catalog))
            .collect();
        let minimal: BTreeSet<Vec<Option<VarSet>>> = safe
            .iter()
            .filter(|d| !safe.iter().any(|o| chased_le(o, d) && !chased_le(d, o)))
            .cloned()
            .collect();
        let plans = enumerate_minimal_plans(&q, &catalog, true);
        let mut got = BTreeSet::new();
        for p in &plans {
            let d = plan_to_dissociation(p, &q).unwrap();
            assert!(is_safe_dissociation(&q, &d), "{q}: {d} unsafe");
            assert!(got.insert(chased(&d, &q, &catalog)), "{q}\n{catalog}: class hit twice");
        }
        assert_eq!(got, minimal, "{q}\n{catalog}");
        if catalog.fds().is_empty() {
            // without FDs the chase is the identity and the literal preorder applies
            for p in &plans {
                let d = plan_to_dissociation(p, &q).unwrap();
                let below = all_dissociations(&q)
                    .into_iter()
                    .filter(|o| is_safe_dissociation(&q, o))
                    .any(|o| strictly_below(&o, &d, Order::ProbFd, &q, &catalog));
                assert!(!below, "{q}: {d} not minimal");
                assert!(minimal.iter().any(|m| equivalent_chase(m, &chased(&d, &q, &catalog))));
            }
        }
    }
}

fn equivalent_chase(a: &[Option<VarSet>], b: &[Option<VarSet>]) -> bool {
    chased_le(a, b) && chased_le(b, a)
}
