//! Fixtures shared by the benchmarks.

use dissoc_core::db::Database;
use dissoc_core::harness::{generate, GenSpec, QueryFamily};
use dissoc_core::query::{Catalog, Query};

/// A chain or star instance with probabilities in `[0, 0.1]`.
pub fn instance(family: QueryFamily, k: usize, n: usize, domain: i64) -> (Query, Database, Catalog) {
    generate(&GenSpec {
        family,
        k,
        n,
        domain,
        p_max: 0.1,
        seed: 42,
    })
    .expect("valid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_stable() {
        let (q, db, _) = instance(QueryFamily::Chain, 4, 50, 40);
        assert_eq!(q.atoms().len(), 4);
        assert_eq!(db, instance(QueryFamily::Chain, 4, 50, 40).1);
    }
}
