use thiserror::Error;

use crate::embedding::GramForm;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sparsity is undefined for an empty or full side (|S| = {size}, n = {n})")]
    UndefinedSparsity { size: usize, n: usize },

    #[error("no subset size k satisfies {c}*{n} < k < (1-{c})*{n}")]
    InfeasibleBalance { n: usize, c: f64 },

    #[error("graph has {n} vertices, above the brute-force cap of {cap}")]
    BruteForceCap { n: usize, cap: usize },

    #[error("graph has {n} vertices, above the solver cap of {cap}")]
    SolverCap { n: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("cut is not {c}-balanced (|S| = {size}, n = {n})")]
    UnbalancedCut { size: usize, n: usize, c: f64 },

    #[error("solver stopped after {iterations} iterations with residual {residual:e}")]
    NonConverged {
        iterations: usize,
        residual: f64,
        best: Option<Box<GramForm>>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
