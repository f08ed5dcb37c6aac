//! Seeded random queries and databases for property checks and benchmarks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::db::{Database, Relation, Value};
use crate::query::{Atom, Catalog, Query, Var, VarSet};

pub type Rng64 = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Rng64 {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct QueryShape {
    pub max_atoms: usize,
    pub max_vars: usize,
    pub max_arity: usize,
    /// Chance that a variable becomes a head variable.
    pub head_prob: f64,
    /// Chance that a relation is deterministic.
    pub det_prob: f64,
}

impl Default for QueryShape {
    fn default() -> Self {
        QueryShape {
            max_atoms: 4,
            max_vars: 4,
            max_arity: 3,
            head_prob: 0.0,
            det_prob: 0.0,
        }
    }
}

/// A random connected-or-not self-join-free query over `R0, R1, ...` with
/// its catalog. Every atom has at least one variable.
pub fn random_query(rng: &mut Rng64, shape: &QueryShape) -> (Query, Catalog) {
    let atoms_n = rng.gen_range(1..=shape.max_atoms);
    let vars_n = rng.gen_range(1..=shape.max_vars);
    let pool: Vec<Var> = (0..vars_n).map(|i| Var::new(&format!("v{i}"))).collect();
    let mut atoms = Vec::with_capacity(atoms_n);
    let mut catalog = Catalog::new();
    for i in 0..atoms_n {
        let arity = rng.gen_range(1..=shape.max_arity.min(vars_n));
        let mut args: Vec<Var> = pool.choose_multiple(rng, arity).cloned().collect();
        args.sort();
        let name = format!("R{i}");
        let probabilistic = !rng.gen_bool(shape.det_prob);
        catalog.add_relation(&name, arity, probabilistic).expect("fresh name");
        atoms.push(Atom { relation: name, args });
    }
    let used: VarSet = atoms.iter().flat_map(|a| a.args.iter().cloned()).collect();
    let head: VarSet = used.into_iter().filter(|_| rng.gen_bool(shape.head_prob)).collect();
    (Query::new(atoms, head).expect("valid by construction"), catalog)
}

/// Fills every relation of `catalog` with up to `max_tuples` distinct random
/// tuples over `{1..domain}`; probabilities uniform in `[0, p_max]`.
pub fn random_database(rng: &mut Rng64, catalog: &Catalog, domain: i64, max_tuples: usize, p_max: f64) -> Database {
    let mut db = Database::new();
    for decl in catalog.relations() {
        let mut rel = Relation::new(&decl.name, decl.arity, decl.probabilistic);
        let capacity = (domain as usize).saturating_pow(decl.arity as u32);
        let target = rng.gen_range(0..=max_tuples.min(capacity));
        let mut seen = BTreeSet::new();
        while seen.len() < target {
            let values: Vec<Value> = (0..decl.arity).map(|_| Value::Int(rng.gen_range(1..=domain))).collect();
            if seen.insert(values.clone()) {
                let p = if decl.probabilistic {
                    rng.gen_range(0.0..=p_max)
                } else {
                    1.0
                };
                rel.push(values, p).expect("valid tuple");
            }
        }
        db.insert(rel);
    }
    db
}
