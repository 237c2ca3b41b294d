use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sepkit_bench::{bench_graph, random_embedding};
use sepkit_core::rng::rng_from_seed;
use sepkit_core::rounding::{distances_from, gaussian_projection_test, modified_set_find, RoundingParams};

fn set_find(c: &mut Criterion) {
    let mut group = c.benchmark_group("set_find");
    let params = RoundingParams::new(0.2, 1.0, 0.05).unwrap();
    for n in [32, 128, 512] {
        let e = random_embedding(n, 8, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &e, |b, e| {
            let mut rng = rng_from_seed(0);
            b.iter(|| modified_set_find(black_box(e), 1.0, &params, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn region_growing(c: &mut Criterion) {
    let mut group = c.benchmark_group("distances");
    for n in [32, 128, 512] {
        let g = bench_graph(n, 4);
        let e = random_embedding(n, 8, 4);
        let sources: Vec<usize> = (0..n / 4).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| distances_from(black_box(&g), &e, 1.0, &sources))
        });
    }
    group.finish();
}

fn projection(c: &mut Criterion) {
    c.bench_function("projection_d100_10k", |b| {
        b.iter(|| gaussian_projection_test(100, 1.0, black_box(0.1), 10_000, 5).unwrap())
    });
}

criterion_group!(benches, set_find, region_growing, projection);
criterion_main!(benches);
