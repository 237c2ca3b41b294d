use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sepkit_bench::bench_graph;
use sepkit_core::concave::{solve_concave, ConcaveOptions};
use sepkit_core::graph::{exact_balanced_separator, Graph};
use sepkit_core::sdp::{solve_sdp, SdpOptions};

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact");
    for n in [10, 14, 18] {
        let g = bench_graph(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| exact_balanced_separator(black_box(g), 0.25).unwrap())
        });
    }
    group.finish();
}

fn sdp(c: &mut Criterion) {
    let mut group = c.benchmark_group("sdp");
    group.sample_size(10);
    for n in [8, 16, 24] {
        let g = bench_graph(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| solve_sdp(black_box(g), 0.25, &SdpOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn concave(c: &mut Criterion) {
    let mut group = c.benchmark_group("concave");
    group.sample_size(10);
    let g = Graph::cycle(6).unwrap();
    for p in [0.5, 1.0, 1.5] {
        group.bench_with_input(BenchmarkId::new("C6", p), &p, |b, &p| {
            b.iter(|| solve_concave(black_box(&g), 0.25, p, &ConcaveOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, exact, sdp, concave);
criterion_main!(benches);
