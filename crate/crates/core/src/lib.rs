//! Relaxations, solvers and rounding for the c-balanced separator problem.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: simple undirected graphs, cuts, and the exhaustive exact oracle.
//! - [`embedding`]: unit vector representations and their Gram / Z matrix forms,
//!   objective and constraint evaluation.
//! - [`engine`]: the first-order solver core shared by both relaxation front ends.
//! - [`sdp`]: the p = 2 semidefinite relaxation with lazy triangle constraints.
//! - [`concave`]: the 0 < p < 2 concave program, its successive-linearization
//!   solver, Hessian checks and a brute-force n = 3 grid oracle.
//! - [`rounding`]: set-find, separation checks, cut production and the end-to-end pipeline.
//! - [`verify`]: property suites that the command-line harness runs on demand.

pub mod concave;
pub mod embedding;
pub mod engine;
mod error;
pub mod graph;
pub mod rng;
pub mod rounding;
pub mod sdp;
mod triangles;
pub mod verify;

pub use concave::{
    check_concavity, feasible_point_from_cut, grid_oracle_n3, hessian_f, linear_subproblem,
    solve_concave, ConcaveOptions, ConcavityReport, HessianSample,
};
pub use embedding::{
    check_feasibility, cut_to_embedding, embedding_from_gram, gram_from_embedding, gram_from_z,
    objective, objective_z, spread, z_from_gram, Embedding, FeasibilityReport, GramForm,
    RelaxationParams, Tolerances, ZForm,
};
pub use error::{Error, Result};
pub use graph::{
    cut_size, exact_balanced_separator, is_c_balanced, sparsity, Cut, Graph, Sparsity,
    DEFAULT_BRUTE_FORCE_CAP,
};
pub use rounding::{
    check_separated, delta_target, gaussian_projection_test, modified_set_find, pipeline,
    produce_cut, round_embedding, DeltaChoice, FailureReason, PipelineOptions, PipelineReport, ProjectionTestReport,
    RoundingParams, SeparatedSets, SetFindOutcome,
};
pub use sdp::{solve_sdp, violated_triangles, SdpOptions, SolveReport, WarmStart};
