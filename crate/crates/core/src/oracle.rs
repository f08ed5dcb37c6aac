//! Ground truth: exact probability of monotone DNFs, Monte-Carlo estimates,
//! and the bound check for oblivious dissociations of Boolean formulas.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Debug;

use rand::Rng;

use crate::db::Database;
use crate::engine::{lineage, Dnf, ScoredRelation, DEFAULT_LINEAGE_CAP};
use crate::error::{EngineError, OracleError};
use crate::query::Query;
use crate::random::rng;

/// Independent probability of each variable.
pub type Distribution<V> = BTreeMap<V, f64>;

/// Budget for exact evaluation.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    /// Memoised residual formulas before giving up.
    pub max_states: usize,
    /// Monomials accepted on input.
    pub max_monomials: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_states: 1 << 20,
            max_monomials: 100_000,
        }
    }
}

type Mono = Vec<u32>;

/// Dense form of a formula: variables renumbered, probability-0 and
/// probability-1 variables folded in.
struct Dense {
    probs: Vec<f64>,
    formula: Vec<Mono>,
}

fn densify<V: Ord + Clone + Debug>(f: &Dnf<V>, dist: &Distribution<V>) -> Result<Dense, OracleError> {
    let mut ids: BTreeMap<&V, u32> = BTreeMap::new();
    let mut probs = Vec::new();
    let mut formula = Vec::with_capacity(f.len());
    'monomials: for m in f {
        let mut mono = Vec::with_capacity(m.len());
        for v in m {
            let p = *dist
                .get(v)
                .ok_or_else(|| OracleError::MissingProbability(format!("{v:?}")))?;
            if p <= 0.0 {
                continue 'monomials;
            }
            if p >= 1.0 {
                continue;
            }
            let id = *ids.entry(v).or_insert_with(|| {
                probs.push(p);
                probs.len() as u32 - 1
            });
            mono.push(id);
        }
        mono.sort_unstable();
        formula.push(mono);
    }
    Ok(Dense { probs, formula })
}

/// Sorts, deduplicates and drops absorbed monomials. Returns `None` when
/// an empty monomial makes the formula true.
fn normalize(mut f: Vec<Mono>) -> Option<Vec<Mono>> {
    if f.iter().any(Vec::is_empty) {
        return None;
    }
    f.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    f.dedup();
    let mut kept: Vec<Mono> = Vec::with_capacity(f.len());
    for m in f {
        if !kept.iter().any(|k| is_subset(k, &m)) {
            kept.push(m);
        }
    }
    kept.sort_unstable();
    Some(kept)
}

fn is_subset(a: &[u32], b: &[u32]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

struct Solver<'a> {
    probs: &'a [f64],
    memo: HashMap<Vec<Mono>, f64>,
    limits: OracleLimits,
}

impl Solver<'_> {
    fn prob(&mut self, f: Vec<Mono>) -> Result<f64, OracleError> {
        let Some(f) = normalize(f) else {
            return Ok(1.0);
        };
        match f.len() {
            0 => return Ok(0.0),
            1 => return Ok(f[0].iter().map(|&v| self.probs[v as usize]).product()),
            _ => {}
        }
        if let Some(&p) = self.memo.get(&f) {
            return Ok(p);
        }
        let components = split(&f);
        let p = if components.len() > 1 {
            let mut miss = 1.0;
            for c in components {
                miss *= 1.0 - self.prob(c)?;
            }
            1.0 - miss
        } else if f.len() <= 4 {
            self.inclusion_exclusion(&f)
        } else {
            let pivot = most_frequent(&f);
            let p = self.probs[pivot as usize];
            let when_true = f
                .iter()
                .map(|m| m.iter().copied().filter(|&v| v != pivot).collect())
                .collect();
            let when_false = f.iter().filter(|m| !m.contains(&pivot)).cloned().collect();
            p * self.prob(when_true)? + (1.0 - p) * self.prob(when_false)?
        };
        if self.memo.len() >= self.limits.max_states {
            return Err(OracleError::TooLarge(format!(
                "more than {} intermediate formulas",
                self.limits.max_states
            )));
        }
        self.memo.insert(f, p);
        Ok(p)
    }

    fn inclusion_exclusion(&self, f: &[Mono]) -> f64 {
        let mut total = 0.0;
        for mask in 1u32..(1 << f.len()) {
            let vars: BTreeSet<u32> = (0..f.len())
                .filter(|i| mask & (1 << i) != 0)
                .flat_map(|i| f[i].iter().copied())
                .collect();
            let term: f64 = vars.iter().map(|&v| self.probs[v as usize]).product();
            if mask.count_ones() % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
        total
    }
}

/// Groups of monomials that share no variable.
fn split(f: &[Mono]) -> Vec<Vec<Mono>> {
    let mut owner: HashMap<u32, usize> = HashMap::new();
    let mut parent: Vec<usize> = (0..f.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (i, m) in f.iter().enumerate() {
        for &v in m {
            if let Some(&j) = owner.get(&v) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            } else {
                owner.insert(v, i);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Mono>> = BTreeMap::new();
    for (i, m) in f.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(m.clone());
    }
    groups.into_values().collect()
}

fn most_frequent(f: &[Mono]) -> u32 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in f.iter().flatten() {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by_key(|&(v, c)| (c, std::cmp::Reverse(v)))
        .expect("non-empty formula")
        .0
}

/// Exact probability of a monotone DNF with independent variables.
pub fn exact_dnf_prob<V: Ord + Clone + Debug>(f: &Dnf<V>, dist: &Distribution<V>) -> Result<f64, OracleError> {
    exact_dnf_prob_with(f, dist, OracleLimits::default())
}

pub fn exact_dnf_prob_with<V: Ord + Clone + Debug>(
    f: &Dnf<V>,
    dist: &Distribution<V>,
    limits: OracleLimits,
) -> Result<f64, OracleError> {
    if f.len() > limits.max_monomials {
        return Err(OracleError::TooLarge(format!("{} monomials", f.len())));
    }
    let dense = densify(f, dist)?;
    let mut solver = Solver {
        probs: &dense.probs,
        memo: HashMap::new(),
        limits,
    };
    solver.prob(dense.formula)
}

/// Exact probability of every answer of `q`, through its lineage.
pub fn exact_query_prob(q: &Query, db: &Database) -> Result<ScoredRelation, EngineError> {
    exact_query_prob_with(q, db, OracleLimits::default())
}

pub fn exact_query_prob_with(q: &Query, db: &Database, limits: OracleLimits) -> Result<ScoredRelation, EngineError> {
    let lin = lineage(q, db, DEFAULT_LINEAGE_CAP)?;
    let dist = db.probabilities();
    let mut rows = BTreeMap::new();
    for (answer, f) in &lin.answers {
        rows.insert(answer.clone(), exact_dnf_prob_with(f, &dist, limits)?);
    }
    Ok(ScoredRelation { vars: lin.vars, rows })
}

/// Fraction of `samples` independent draws that satisfy `f`.
pub fn mc_estimate<V: Ord + Clone + Debug>(
    f: &Dnf<V>,
    dist: &Distribution<V>,
    samples: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    assert!(samples >= 1, "at least one sample");
    let vars: Vec<&V> = f.iter().flatten().collect::<BTreeSet<_>>().into_iter().collect();
    let mut probs = Vec::with_capacity(vars.len());
    for v in &vars {
        probs.push(
            *dist
                .get(*v)
                .ok_or_else(|| OracleError::MissingProbability(format!("{v:?}")))?,
        );
    }
    let formula: Vec<Vec<usize>> = f
        .iter()
        .map(|m| m.iter().map(|v| vars.binary_search(&v).expect("collected")).collect())
        .collect();
    let mut r = rng(seed);
    let mut world = vec![false; vars.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (slot, &p) in world.iter_mut().zip(&probs) {
            *slot = r.gen::<f64>() < p;
        }
        if formula.iter().any(|m| m.iter().all(|&i| world[i])) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// Outcome of [`check_oblivious_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    /// No prime implicant of the dissociated formula holds two copies of
    /// the same original variable.
    pub valid: bool,
    /// `P[f] ≤ P[f']`, or equality when every dissociated variable is
    /// deterministic.
    pub bound_holds: bool,
    pub original: f64,
    pub dissociated: f64,
}

/// Checks the dissociation `f_diss` of `f_orig` under the substitution
/// `theta` (fresh variable to original), giving every copy the probability
/// of its original.
pub fn check_oblivious_bound<V: Ord + Clone + Debug>(
    f_orig: &Dnf<V>,
    f_diss: &Dnf<V>,
    theta: &BTreeMap<V, V>,
    dist: &Distribution<V>,
) -> Result<BoundCheck, OracleError> {
    let image = |v: &V| {
        theta
            .get(v)
            .cloned()
            .ok_or_else(|| OracleError::InvalidSubstitution(format!("{v:?} has no image")))
    };
    let mut substituted: Dnf<V> = Vec::new();
    for m in f_diss {
        substituted.push(m.iter().map(image).collect::<Result<_, _>>()?);
    }
    if prime_implicants(&substituted) != prime_implicants(f_orig) {
        return Err(OracleError::InvalidSubstitution(
            "substituted formula differs from the original".into(),
        ));
    }
    let valid = prime_implicants(f_diss).iter().all(|m| {
        let images: BTreeSet<&V> = m.iter().map(|v| &theta[v]).collect();
        images.len() == m.len()
    });
    let mut diss_dist = Distribution::new();
    for v in f_diss.iter().flatten() {
        let original = &theta[v];
        let p = *dist
            .get(original)
            .ok_or_else(|| OracleError::MissingProbability(format!("{original:?}")))?;
        diss_dist.insert(v.clone(), p);
    }
    let original = exact_dnf_prob(f_orig, dist)?;
    let dissociated = exact_dnf_prob(f_diss, &diss_dist)?;
    let mut copies: BTreeMap<&V, BTreeSet<&V>> = BTreeMap::new();
    for v in f_diss.iter().flatten() {
        copies.entry(&theta[v]).or_default().insert(v);
    }
    let deterministic = copies
        .iter()
        .filter(|(_, c)| c.len() > 1)
        .all(|(x, _)| matches!(dist.get(*x), Some(&p) if p == 0.0 || p == 1.0));
    let bound_holds = if deterministic {
        (original - dissociated).abs() <= 1e-12
    } else {
        original <= dissociated + 1e-12
    };
    Ok(BoundCheck {
        valid,
        bound_holds,
        original,
        dissociated,
    })
}

/// Minimal monomials of a monotone DNF.
fn prime_implicants<V: Ord + Clone>(f: &Dnf<V>) -> BTreeSet<BTreeSet<V>> {
    f.iter()
        .filter(|m| !f.iter().any(|o| o.len() < m.len() && o.is_subset(m)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dnf(monomials: &[&[&'static str]]) -> Dnf<&'static str> {
        monomials.iter().map(|m| m.iter().copied().collect()).collect()
    }

    fn dist(pairs: &[(&'static str, f64)]) -> Distribution<&'static str> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn single_variable() {
        assert!((exact_dnf_prob(&dnf(&[&["X"]]), &dist(&[("X", 0.7)])).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn running_example_formula() {
        let (p, q, r) = (0.3, 0.4, 0.9);
        let f = dnf(&[&["X", "Y"], &["X", "Z"]]);
        let d = dist(&[("X", p), ("Y", q), ("Z", r)]);
        assert!((exact_dnf_prob(&f, &d).unwrap() - (p * q + p * r - p * q * r)).abs() < 1e-12);
    }

    #[test]
    fn shannon_expansion_path() {
        // six monomials in one component force Shannon expansion
        let f = dnf(&[
            &["A", "B"],
            &["B", "C"],
            &["C", "D"],
            &["D", "E"],
            &["E", "F"],
            &["F", "A"],
        ]);
        let names = ["A", "B", "C", "D", "E", "F"];
        let d: Distribution<&str> = names.iter().map(|&n| (n, 0.5)).collect();
        // brute force over 64 worlds
        let mut expected = 0.0;
        for world in 0u32..64 {
            let on = |n: &str| world & (1 << names.iter().position(|&x| x == n).unwrap()) != 0;
            if f.iter().any(|m| m.iter().all(|v| on(v))) {
                expected += 1.0 / 64.0;
            }
        }
        assert!((exact_dnf_prob(&f, &d).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn state_budget_is_enforced() {
        let f = dnf(&[
            &["A", "B"],
            &["B", "C"],
            &["C", "D"],
            &["D", "E"],
            &["E", "F"],
            &["F", "A"],
        ]);
        let d: Distribution<&str> = ["A", "B", "C", "D", "E", "F"].iter().map(|&n| (n, 0.5)).collect();
        let tight = OracleLimits {
            max_states: 0,
            max_monomials: 10,
        };
        assert!(matches!(
            exact_dnf_prob_with(&f, &d, tight),
            Err(OracleError::TooLarge(_))
        ));
    }

    #[test]
    fn certain_variables_fold_away() {
        let f = dnf(&[&["X", "Y"]]);
        assert_eq!(exact_dnf_prob(&f, &dist(&[("X", 1.0), ("Y", 1.0)])).unwrap(), 1.0);
        assert_eq!(mc_estimate(&f, &dist(&[("X", 1.0), ("Y", 1.0)]), 100, 3).unwrap(), 1.0);
        assert_eq!(exact_dnf_prob(&f, &dist(&[("X", 0.0), ("Y", 1.0)])).unwrap(), 0.0);
    }

    #[test]
    fn dissociation_of_running_example() {
        let p = 0.6;
        let f = dnf(&[&["X", "Y"], &["X", "Z"]]);
        let g = dnf(&[&["X1", "Y"], &["X2", "Z"]]);
        let theta: BTreeMap<&str, &str> = [("X1", "X"), ("X2", "X"), ("Y", "Y"), ("Z", "Z")].into_iter().collect();
        let check = check_oblivious_bound(&f, &g, &theta, &dist(&[("X", p), ("Y", 0.5), ("Z", 0.2)])).unwrap();
        assert!(check.valid && check.bound_holds);
        assert!(check.original < check.dissociated);

        let one = dnf(&[&["X"]]);
        let both = dnf(&[&["X1", "X2"]]);
        let check = check_oblivious_bound(&one, &both, &theta, &dist(&[("X", p)])).unwrap();
        assert!(!check.valid);
        assert!((check.dissociated - p * p).abs() < 1e-12);
        assert!(!check.bound_holds);
    }

    #[test]
    fn deterministic_copies_give_equality() {
        let f = dnf(&[&["X", "Y"], &["X", "Z"]]);
        let g = dnf(&[&["X1", "Y"], &["X2", "Z"]]);
        let theta: BTreeMap<&str, &str> = [("X1", "X"), ("X2", "X"), ("Y", "Y"), ("Z", "Z")].into_iter().collect();
        let check = check_oblivious_bound(&f, &g, &theta, &dist(&[("X", 1.0), ("Y", 0.5), ("Z", 0.2)])).unwrap();
        assert!(check.valid && check.bound_holds);
        assert!((check.original - check.dissociated).abs() < 1e-12);
    }

    #[test]
    fn identity_substitution_is_equality() {
        let f = dnf(&[&["X", "Y"], &["X", "Z"]]);
        let theta: BTreeMap<&str, &str> = [("X", "X"), ("Y", "Y"), ("Z", "Z")].into_iter().collect();
        let check = check_oblivious_bound(&f, &f, &theta, &dist(&[("X", 0.3), ("Y", 0.5), ("Z", 0.2)])).unwrap();
        assert!(check.valid && check.bound_holds);
        assert_eq!(check.original, check.dissociated);
    }

    #[test]
    fn wrong_substitution_is_rejected() {
        let f = dnf(&[&["X", "Y"]]);
        let g = dnf(&[&["X1", "Z"]]);
        let theta: BTreeMap<&str, &str> = [("X1", "X"), ("Z", "Z")].into_iter().collect();
        let d = dist(&[("X", 0.3), ("Y", 0.5), ("Z", 0.2)]);
        assert!(matches!(
            check_oblivious_bound(&f, &g, &theta, &d),
            Err(OracleError::InvalidSubstitution(_))
        ));
        let partial: BTreeMap<&str, &str> = [("X1", "X")].into_iter().collect();
        assert!(check_oblivious_bound(&f, &g, &partial, &d).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible_and_close() {
        let f = dnf(&[&["X", "Y"], &["X", "Z"]]);
        let d = dist(&[("X", 0.5), ("Y", 0.5), ("Z", 0.5)]);
        let a = mc_estimate(&f, &d, 100_000, 9).unwrap();
        assert_eq!(a, mc_estimate(&f, &d, 100_000, 9).unwrap());
        assert!((a - exact_dnf_prob(&f, &d).unwrap()).abs() < 1e-2);
    }
}
