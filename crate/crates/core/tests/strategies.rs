use dissoc_core::db::Database;
use dissoc_core::engine::{eval_deterministic, eval_plan_score, propagation_score, ScoredRelation, Strategy};
use dissoc_core::enumerate::enumerate_minimal_plans;
use dissoc_core::optimize::semijoin_reduce;
use dissoc_core::query::{Catalog, Query};
use dissoc_core::random::{random_database, random_query, rng, QueryShape};

fn max_gap(a: &ScoredRelation, b: &ScoredRelation) -> f64 {
    assert_eq!(a.rows.len(), b.rows.len());
    a.rows.iter().map(|(k, x)| (x - b.rows[k]).abs()).fold(0.0, f64::max)
}

fn instances(seed: u64, count: usize, shape: &QueryShape) -> Vec<(Query, Catalog, Database)> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let (q, c) = random_query(&mut r, shape);
            let db = random_database(&mut r, &c, 4, 10, 1.0);
            (q, c, db)
        })
        .collect()
}

#[test]
fn strategies_agree_on_random_instances() {
    let shape = QueryShape {
        max_atoms: 5,
        max_vars: 4,
        max_arity: 3,
        head_prob: 0.2,
        det_prob: 0.0,
    };
    let mut worst = (0.0, String::new());
    for (q, c, db) in instances(21, 200, &shape) {
        let base = propagation_score(&q, &db, &c, Strategy::AllPlans, false).unwrap();
        for s in [Strategy::Opt1, Strategy::Opt12, Strategy::Opt123] {
            let got = propagation_score(&q, &db, &c, s, false).unwrap();
            let gap = max_gap(&base, &got);
            if gap > worst.0 {
                worst = (gap, format!("{q} {s:?}"));
            }
        }
    }
    assert!(worst.0 <= 1e-9, "largest gap {} at {}", worst.0, worst.1);
}

#[test]
fn semijoin_reduction_preserves_every_plan() {
    let shape = QueryShape {
        max_atoms: 4,
        max_vars: 4,
        max_arity: 3,
        head_prob: 0.2,
        det_prob: 0.0,
    };
    for (q, c, db) in instances(5, 100, &shape) {
        let reduced = semijoin_reduce(&db, &q).unwrap();
        assert_eq!(
            eval_deterministic(&q, &db).unwrap(),
            eval_deterministic(&q, &reduced).unwrap()
        );
        for p in enumerate_minimal_plans(&q, &c, false) {
            let full = eval_plan_score(&p, &db).unwrap();
            let small = eval_plan_score(&p, &reduced).unwrap();
            assert!(max_gap(&full, &small) <= 1e-12, "{q}\n{p}");
        }
    }
}

/// Pushing the minimum below a projection lets every projected tuple pick
/// its own branch, so the single plan can undercut every minimal plan. It
/// still never drops below the exact probability.
#[test]
fn single_plan_lies_between_exact_and_all_plans() {
    use dissoc_core::oracle::exact_query_prob;
    let shape = QueryShape {
        max_atoms: 5,
        max_vars: 5,
        max_arity: 3,
        head_prob: 0.1,
        det_prob: 0.0,
    };
    let mut r = rng(99);
    let mut strictly_lower = 0;
    for _ in 0..1000 {
        let (q, c) = random_query(&mut r, &shape);
        let db = random_database(&mut r, &c, 3, 20, 1.0);
        let all = propagation_score(&q, &db, &c, Strategy::AllPlans, false).unwrap();
        let single = propagation_score(&q, &db, &c, Strategy::Opt1, false).unwrap();
        let views = propagation_score(&q, &db, &c, Strategy::Opt12, false).unwrap();
        let reduced = propagation_score(&q, &db, &c, Strategy::Opt123, false).unwrap();
        let exact = exact_query_prob(&q, &db).unwrap();
        assert!(max_gap(&single, &views) <= 1e-12, "{q}");
        assert!(max_gap(&views, &reduced) <= 1e-12, "{q}");
        for (k, &s) in &single.rows {
            assert!(s <= all.rows[k] + 1e-12, "{q}");
            assert!(s >= exact.rows[k] - 1e-12, "{q}");
            if s < all.rows[k] - 1e-9 {
                strictly_lower += 1;
            }
        }
    }
    assert!(strictly_lower > 0, "expected the single plan to undercut somewhere");
}
