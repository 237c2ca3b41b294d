//! Fixtures shared by the benchmarks.

use sepkit_core::embedding::Embedding;
use sepkit_core::graph::Graph;
use sepkit_core::rng::derived_rng;
use sepkit_core::rounding::random_unit_vector;

/// Seeded G(n, 1/2).
pub fn bench_graph(n: usize, seed: u64) -> Graph {
    Graph::gnp(n, 0.5, &mut derived_rng(seed, "bench-graph", n as u64)).expect("valid size")
}

/// `n` uniform unit vectors in `R^d`.
pub fn random_embedding(n: usize, d: usize, seed: u64) -> Embedding {
    let mut rng = derived_rng(seed, "bench-embedding", n as u64);
    Embedding::new((0..n).map(|_| random_unit_vector(d, &mut rng)).collect(), 1e-9).expect("unit rows")
}
