use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dissoc_core::enumerate::enumerate_minimal_plans;
use dissoc_core::harness::{chain_query, star_query};
use dissoc_core::optimize::{shared_view_plan, single_plan};

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumerate");
    for k in [4, 6, 8] {
        let (q, catalog) = chain_query(k);
        group.bench_with_input(BenchmarkId::new("chain", k), &k, |b, _| {
            b.iter(|| enumerate_minimal_plans(&q, &catalog, false))
        });
    }
    for k in [3, 5, 6] {
        let (q, catalog) = star_query(k);
        group.bench_with_input(BenchmarkId::new("star", k), &k, |b, _| {
            b.iter(|| enumerate_minimal_plans(&q, &catalog, false))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("single_plan");
    for k in [4, 8, 10] {
        let (q, catalog) = chain_query(k);
        group.bench_with_input(BenchmarkId::new("chain", k), &k, |b, _| {
            b.iter(|| single_plan(&q, &catalog, false))
        });
        group.bench_with_input(BenchmarkId::new("chain_views", k), &k, |b, _| {
            b.iter(|| shared_view_plan(&q, &catalog, false))
        });
    }
    group.finish();
}

criterion_group!(benches, enumeration);
criterion_main!(benches);
