use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;

use dissoc_core::dissociation::{all_dissociations, compare, Order};
use dissoc_core::harness::average_precision_at_k;
use dissoc_core::oracle::{exact_dnf_prob, mc_estimate};
use dissoc_core::random::{random_query, rng, QueryShape};

/// Scores on a coarse grid so that ties are common.
fn scores(len: usize) -> impl Strategy<Value = BTreeMap<usize, f64>> {
    prop::collection::vec(0u8..5, len)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, s)| (i, s as f64 / 4.0)).collect())
}

/// Plain AP@k after breaking ties at random, averaged over many draws.
fn sampled_ap(returned: &BTreeMap<usize, f64>, truth: &BTreeMap<usize, f64>, k: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let order = |s: &BTreeMap<usize, f64>, r: &mut _| {
        let mut items: Vec<usize> = s.keys().copied().collect();
        items.shuffle(r);
        items.sort_by(|a, b| s[b].total_cmp(&s[a]));
        items
    };
    let draws = 20_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let a = order(returned, &mut r);
        let b = order(truth, &mut r);
        let m = a.len();
        let mut ap = 0.0;
        for j in 1..=k {
            let top_a: BTreeSet<_> = a.iter().take(j).collect();
            let hits = b.iter().take(j).filter(|x| top_a.contains(x)).count();
            ap += hits as f64 / j.min(m) as f64;
        }
        total += ap / k as f64;
    }
    total / draws as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ap_is_a_fraction_and_one_on_itself((a, b) in (1usize..12).prop_flat_map(|n| (scores(n), scores(n))), k in 1usize..12) {
        let ap = average_precision_at_k(&a, &b, k).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
        let distinct: BTreeMap<usize, f64> = b.keys().map(|&i| (i, i as f64)).collect();
        prop_assert!((average_precision_at_k(&distinct, &distinct, k).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_matches_random_tie_breaking((a, b) in (1usize..8).prop_flat_map(|n| (scores(n), scores(n))), k in 1usize..6, seed in any::<u64>()) {
        let analytic = average_precision_at_k(&a, &b, k).unwrap();
        let sampled = sampled_ap(&a, &b, k, seed);
        prop_assert!((analytic - sampled).abs() < 0.02, "{} vs {}", analytic, sampled);
    }

    #[test]
    fn ap_ignores_monotone_rescaling((a, b) in (1usize..10).prop_flat_map(|n| (scores(n), scores(n))), k in 1usize..10) {
        let squashed: BTreeMap<usize, f64> = a.iter().map(|(&i, &s)| (i, 0.1 + s * s)).collect();
        let x = average_precision_at_k(&a, &b, k).unwrap();
        let y = average_precision_at_k(&squashed, &b, k).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn dissociation_order_is_a_preorder(seed in any::<u64>()) {
        let shape = QueryShape { max_atoms: 3, max_vars: 3, max_arity: 2, head_prob: 0.2, det_prob: 0.3 };
        let (q, c) = random_query(&mut rng(seed), &shape);
        let ds = all_dissociations(&q);
        for order in [Order::Plain, Order::Prob, Order::ProbFd] {
            for a in &ds {
                prop_assert!(compare(a, a, order, &q, &c));
                for b in &ds {
                    if !compare(a, b, order, &q, &c) {
                        continue;
                    }
                    for d in &ds {
                        if compare(b, d, order, &q, &c) {
                            prop_assert!(compare(a, d, order, &q, &c), "{} {:?}", q, order);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_converges_to_exact(
        monomials in prop::collection::vec(prop::collection::btree_set(0u8..6, 1..4), 1..6),
        probs in prop::collection::vec(0.0f64..=1.0, 6),
        seed in any::<u64>(),
    ) {
        let dist: BTreeMap<u8, f64> = probs.iter().enumerate().map(|(i, &p)| (i as u8, p)).collect();
        let exact = exact_dnf_prob(&monomials, &dist).unwrap();
        let est = mc_estimate(&monomials, &dist, 40_000, seed).unwrap();
        // four standard deviations at the worst case p = 1/2
        prop_assert!((exact - est).abs() < 0.01, "{} vs {}", exact, est);
    }
}
