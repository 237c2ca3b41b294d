//! Solver and pipeline behaviour through the crate-root API.

use proptest::prelude::*;

use sepkit_core::rng::derived_rng;
use sepkit_core::{
    check_feasibility, check_separated, cut_size, embedding_from_gram, exact_balanced_separator, gram_from_z,
    objective, pipeline, round_embedding, solve_concave, solve_sdp, ConcaveOptions, Cut, DeltaChoice,
    Graph, PipelineOptions, RelaxationParams, SdpOptions, Tolerances,
};

const C: f64 = 0.25;

#[test]
fn relaxations_bound_the_exact_optimum() {
    let graphs = [Graph::cycle(6).unwrap(), Graph::complete_bipartite(2, 3).unwrap(), Graph::path(5).unwrap()];
    for g in &graphs {
        let exact = exact_balanced_separator(g, C).unwrap().1 as f64;
        let (x, sdp) = solve_sdp(g, C, &SdpOptions::default()).unwrap();
        assert!(sdp.value <= exact + 1e-5, "sdp {} > exact {exact}", sdp.value);
        assert!(sdp.residuals.feasible);

        // The factored Gram matrix is a feasible embedding with the reported value.
        let e = embedding_from_gram(&x, 1e-6).unwrap();
        assert!((objective(g, &e, 2.0) - sdp.value).abs() < 1e-4);
        let report = check_feasibility(&e, RelaxationParams::new(2.0, C).unwrap(), Tolerances::uniform(1e-5));
        assert!(report.feasible, "{report:?}");

        let (z, concave) = solve_concave(g, C, 1.0, &ConcaveOptions::default()).unwrap();
        assert!(concave.value >= 0.0 && concave.value <= exact + 1e-5);
        assert!(concave.residuals.feasible);
        assert_eq!(gram_from_z(&z).matrix().nrows(), g.n());
    }
}

#[test]
fn pipeline_on_cycle_produces_valid_cut() {
    let g = Graph::cycle(8).unwrap();
    for p in [1.0, 2.0] {
        let r = pipeline(&g, C, p, &PipelineOptions { seed: 5, ..PipelineOptions::default() }).unwrap();
        assert_eq!(r.exact_value, Some(2));
        assert!(r.solver.is_some());
        if r.success {
            let cut = Cut::new(8, r.cut_members.clone().unwrap()).unwrap();
            assert_eq!(cut_size(&g, &cut), r.cut_size.unwrap());
            assert!(cut.len().min(8 - cut.len()) as f64 >= r.c_prime * 8.0);
            assert_eq!(r.t_excluded, Some(true));
            assert_eq!(r.s_contained, Some(true));
        } else {
            assert_eq!(r.attempts, 64);
        }
    }
}

#[test]
fn pipeline_rejects_bad_parameters() {
    let g = Graph::cycle(6).unwrap();
    assert!(pipeline(&g, C, 0.0, &PipelineOptions::default()).is_err());
    assert!(pipeline(&g, C, 2.5, &PipelineOptions::default()).is_err());
    let zero = PipelineOptions { retries: 0, ..PipelineOptions::default() };
    assert!(pipeline(&g, C, 2.0, &zero).is_err());
    let bad_delta = PipelineOptions { delta: DeltaChoice::Fixed(-1.0), ..PipelineOptions::default() };
    assert!(pipeline(&g, C, 2.0, &bad_delta).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // On any successful run: both sides hold at least c'n vertices, the
    // sets are Delta-separated, S is inside V_r and T outside it.
    #[test]
    fn successful_rounding_meets_its_guarantees(seed in any::<u64>(), n in 6usize..11, p_idx in 0usize..4) {
        let p = [0.5, 1.0, 1.5, 2.0][p_idx];
        let g = Graph::gnp(n, 0.5, &mut derived_rng(seed, "graph", 0)).unwrap();
        let (x, report) = solve_sdp(&g, C, &SdpOptions { seed, ..SdpOptions::default() }).unwrap();
        let e = embedding_from_gram(&x, 1e-6).unwrap();
        let opts = PipelineOptions { seed, ..PipelineOptions::default() };
        let r = round_embedding(&g, &e, C, p, report.value, &opts).unwrap();
        if r.success {
            let members = r.cut_members.unwrap();
            let sets = r.sets.unwrap();
            let floor = r.c_prime * n as f64;
            prop_assert!(members.len() as f64 >= floor && (n - members.len()) as f64 >= floor);
            prop_assert!(check_separated(&e, &sets.s_side, &sets.t_side, p, r.delta).separated);
            prop_assert!(sets.s_side.iter().all(|v| members.contains(v)));
            prop_assert!(sets.t_side.iter().all(|v| !members.contains(v)));
            prop_assert!(r.radius.unwrap() < r.delta);
        }
    }
}
