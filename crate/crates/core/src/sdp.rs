//! The p = 2 relaxation: a semidefinite program over Gram matrices with
//! unit diagonal, the spread constraint and lazily added squared-distance
//! triangle inequalities.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{
    check_feasibility, cut_to_embedding, embedding_from_gram, gram_from_embedding, z_spread_bound,
    FeasibilityReport, GramForm, RelaxationParams, Tolerances,
};
use crate::engine::{self, EngineOptions, LinearConstraint, Problem};
use crate::error::{Error, Result};
use crate::graph::{ensure_balance_feasible, exact_balanced_separator, Graph, DEFAULT_BRUTE_FORCE_CAP};
use crate::triangles::{self, TriangleSeparator};

pub use crate::triangles::TriangleViolation;

/// Largest graph the first-order solvers accept.
pub const SDP_VERTEX_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStart {
    /// Cut embedding of the exact optimum when `n` is within the brute-force
    /// cap, the orthonormal embedding otherwise.
    Auto,
    Cut,
    Orthonormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Triangles added per separation round; `None` means `n`.
    pub triangle_batch: Option<usize>,
    pub seed: u64,
    pub warm_start: WarmStart,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol: 1e-6, max_iter: 50_000, triangle_batch: None, seed: 0, warm_start: WarmStart::Auto }
    }
}

impl SdpOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("tol and max_iter must be positive".into()));
        }
        if self.triangle_batch == Some(0) {
            return Err(Error::InvalidParameter("triangle_batch must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub value: f64,
    pub residuals: FeasibilityReport,
    pub iterations: usize,
    pub wall_time_secs: f64,
    pub seed: u64,
    /// The iterative solve reached the tolerance. When false the returned
    /// point is the best feasible start.
    pub converged: bool,
    /// Index of the start the returned point descends from, when there were several.
    pub start_index: Option<usize>,
    pub lazy_constraints: usize,
}

/// Per-edge objective coefficient `1/2` on `z_ij`, i.e. `(1/4) sum_E ||v_i - v_j||^2`.
fn edge_costs(g: &Graph, weight: f64) -> DMatrix<f64> {
    let mut cost = DMatrix::zeros(g.n(), g.n());
    for &(i, j) in g.edges() {
        cost[(i, j)] = weight;
    }
    cost
}

pub(crate) fn spread_constraint(n: usize, c: f64) -> LinearConstraint {
    let terms = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))).collect();
    LinearConstraint::new(terms, -z_spread_bound(n, c))
}

/// `(1/2) sum_E z_ij`.
pub(crate) fn sdp_value(g: &Graph, z: &DMatrix<f64>) -> f64 {
    g.edges().iter().map(|&(i, j)| 0.5 * z[(i, j)].max(0.0)).sum()
}

/// Largest Z-form violation of spread and triangles at exponent `p`.
pub(crate) fn z_residual(z: &DMatrix<f64>, c: f64, p: f64) -> f64 {
    let spread = spread_constraint(z.nrows(), c).value(z);
    (-spread).max(0.0).max(triangles::max_violation(z, p))
}

pub(crate) fn check_inputs(g: &Graph, c: f64) -> Result<RelaxationParams> {
    if g.n() > SDP_VERTEX_CAP {
        return Err(Error::SolverCap { n: g.n(), cap: SDP_VERTEX_CAP });
    }
    ensure_balance_feasible(g.n(), c)?;
    RelaxationParams::new(2.0, c)
}

/// Residuals of a Gram matrix in vector form after factoring it.
pub(crate) fn residuals_of(x: &GramForm, p: f64, c: f64, tol: f64) -> FeasibilityReport {
    let params = RelaxationParams::new(p, c).expect("validated by caller");
    match embedding_from_gram(x, Tolerances::default().psd) {
        Ok(e) => check_feasibility(&e, params, Tolerances::uniform(tol)),
        Err(_) => FeasibilityReport {
            max_unit_violation: f64::INFINITY,
            max_triangle_violation: f64::INFINITY,
            spread_slack: f64::NEG_INFINITY,
            feasible: false,
        },
    }
}

fn resolve_warm_start(g: &Graph, c: f64, mode: WarmStart) -> Result<GramForm> {
    let use_cut = match mode {
        WarmStart::Cut => true,
        WarmStart::Orthonormal => false,
        WarmStart::Auto => g.n() <= DEFAULT_BRUTE_FORCE_CAP,
    };
    if use_cut {
        let (cut, _) = exact_balanced_separator(g, c)?;
        Ok(gram_from_embedding(&cut_to_embedding(g, &cut)))
    } else {
        Ok(GramForm::from_matrix_unchecked(DMatrix::identity(g.n(), g.n())))
    }
}

/// Solves the p = 2 relaxation from the warm start selected in `opts`.
pub fn solve_sdp(g: &Graph, c: f64, opts: &SdpOptions) -> Result<(GramForm, SolveReport)> {
    check_inputs(g, c)?;
    opts.validate()?;
    let start = resolve_warm_start(g, c, opts.warm_start)?;
    solve_sdp_from(g, c, opts, &start)
}

/// Solves the p = 2 relaxation from a caller-supplied start. The returned
/// value never exceeds the start's value when the start is feasible.
pub fn solve_sdp_from(g: &Graph, c: f64, opts: &SdpOptions, start: &GramForm) -> Result<(GramForm, SolveReport)> {
    check_inputs(g, c)?;
    opts.validate()?;
    if start.n() != g.n() {
        return Err(Error::InvalidParameter("warm start has the wrong size".into()));
    }
    let timer = Instant::now();
    let n = g.n();
    // Vector-form distances are twice Z-form ones; halve the internal
    // tolerance so vector-form residuals stay within `tol`.
    let ztol = 0.5 * opts.tol;
    let problem = Problem { n, cost: edge_costs(g, 0.5), constraints: vec![spread_constraint(n, c)] };
    let mut separator = TriangleSeparator::new(2.0);
    let eopts = EngineOptions { tol: ztol, max_iter: opts.max_iter, batch: opts.triangle_batch.unwrap_or(n), opt_tol: None };
    let result = engine::solve(&problem, &mut separator, start.matrix(), eopts);

    let solved_z = result.z();
    let start_z = engine::z_of(start.matrix());
    let solved_ok = result.residual <= ztol;
    let start_ok = z_residual(&start_z, c, 2.0) <= ztol && start_is_elliptope(start);
    let solved_value = sdp_value(g, &solved_z);
    let start_value = sdp_value(g, &start_z);

    let (x, value, converged) = match (solved_ok, start_ok) {
        (true, true) if start_value < solved_value => (start.clone(), start_value, result.converged),
        (true, _) => (GramForm::from_matrix_unchecked(result.x.clone()), solved_value, result.converged),
        (false, true) => (start.clone(), start_value, false),
        (false, false) => {
            return Err(Error::NonConverged {
                iterations: result.iterations,
                residual: result.residual,
                best: Some(Box::new(GramForm::from_matrix_unchecked(result.x))),
            })
        }
    };
    let residuals = residuals_of(&x, 2.0, c, opts.tol);
    let report = SolveReport {
        value,
        residuals,
        iterations: result.iterations,
        wall_time_secs: timer.elapsed().as_secs_f64(),
        seed: opts.seed,
        converged,
        start_index: None,
        lazy_constraints: result.lazy_constraints,
    };
    Ok((x, report))
}

fn start_is_elliptope(x: &GramForm) -> bool {
    let m = x.matrix();
    (0..m.nrows()).all(|i| (m[(i, i)] - 1.0).abs() <= 1e-9)
        && crate::embedding::min_eigenvalue(m) >= -Tolerances::default().psd
}

/// Triples violating `||v_i-v_j||^2 + ||v_j-v_k||^2 >= ||v_i-v_k||^2` by more
/// than `tol` (in squared-distance units), worst first. Each constraint is
/// listed once, with `i < k` and `j` the middle vertex.
pub fn violated_triangles(x: &GramForm, tol: f64) -> Vec<TriangleViolation> {
    let z = engine::z_of(x.matrix());
    triangles::violations(&z, 2.0, 0.5 * tol)
        .into_iter()
        .map(|t| TriangleViolation { violation: 2.0 * t.violation, ..t })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;
    use crate::graph::Cut;

    #[test]
    fn violated_triangles_examples() {
        let g = Graph::cycle(4).unwrap();
        let x = gram_from_embedding(&cut_to_embedding(&g, &Cut::new(4, [0, 1]).unwrap()));
        assert!(violated_triangles(&x, 1e-9).is_empty());

        let id = GramForm::new(DMatrix::identity(4, 4), 1e-12, 1e-7).unwrap();
        assert!(violated_triangles(&id, 1e-9).is_empty());

        // v_i = e1, v_j = e2, v_k = -e1 sits exactly on the boundary.
        let on = Embedding::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0]], 1e-12).unwrap();
        assert!(violated_triangles(&gram_from_embedding(&on), 1e-9).is_empty());

        // Rotating v_k from -e1 towards v_j makes the angle at j obtuse. Search
        // the rotation angle on a grid and check the reported violation.
        let mut detected = 0;
        for step in 1..=20 {
            let s = step as f64 * 0.05;
            let e = Embedding::new(
                vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![-s.cos(), s.sin(), 0.0]],
                1e-12,
            )
            .unwrap();
            let expected = 2.0 * s.cos() + 2.0 * s.sin() - 2.0;
            let found = violated_triangles(&gram_from_embedding(&e), 1e-9);
            if expected > 1e-9 {
                let t = found.iter().find(|t| (t.i, t.j, t.k) == (0, 1, 2)).expect("violation at middle vertex 1");
                assert!((t.violation - expected).abs() < 1e-12);
                assert_eq!(found[0], *t);
                detected += 1;
            }
        }
        assert!(detected > 0);
    }

    fn assert_sound(g: &Graph, c: f64, bound: f64) -> SolveReport {
        let (x, report) = solve_sdp(g, c, &SdpOptions::default()).unwrap();
        assert!(report.value >= -1e-12);
        assert!(report.value <= bound + 1e-6, "value {} above {bound}", report.value);
        assert!(report.residuals.feasible, "{:?}", report.residuals);
        let e = embedding_from_gram(&x, 1e-7).unwrap();
        let params = RelaxationParams::new(2.0, c).unwrap();
        assert!(check_feasibility(&e, params, Tolerances::uniform(1e-6)).feasible);
        report
    }

    #[test]
    fn cycle_four() {
        let r = assert_sound(&Graph::cycle(4).unwrap(), 0.25, 2.0);
        assert!(r.converged);
    }

    #[test]
    fn complete_four() {
        assert_sound(&Graph::complete(4).unwrap(), 0.25, 4.0);
    }

    #[test]
    fn single_edge() {
        let r = assert_sound(&Graph::path(2).unwrap(), 0.25, 1.0);
        // Spread forces z01 >= 2c(1-c)n^2 = 1.5, so the optimum is 0.75.
        assert!((r.value - 0.75).abs() < 1e-5, "{}", r.value);
    }

    #[test]
    fn deterministic() {
        let g = Graph::cycle(6).unwrap();
        let opts = SdpOptions { seed: 3, ..SdpOptions::default() };
        let (x1, r1) = solve_sdp(&g, 0.25, &opts).unwrap();
        let (x2, r2) = solve_sdp(&g, 0.25, &opts).unwrap();
        assert_eq!(x1, x2);
        assert!((r1.value - r2.value).abs() <= 1e-12);
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn orthonormal_start_matches_cut_start() {
        let g = Graph::cycle(6).unwrap();
        let (_, cut) = solve_sdp(&g, 0.25, &SdpOptions::default()).unwrap();
        let opts = SdpOptions { warm_start: WarmStart::Orthonormal, ..SdpOptions::default() };
        let (_, ortho) = solve_sdp(&g, 0.25, &opts).unwrap();
        assert!((cut.value - ortho.value).abs() < 1e-4, "{} vs {}", cut.value, ortho.value);
    }

    #[test]
    fn input_errors() {
        let g = Graph::path(2).unwrap();
        assert!(matches!(solve_sdp(&g, 0.6, &SdpOptions::default()), Err(Error::InfeasibleBalance { .. })));
        let big = Graph::path(65).unwrap();
        assert!(matches!(solve_sdp(&big, 0.25, &SdpOptions::default()), Err(Error::SolverCap { .. })));
        let bad = SdpOptions { tol: 0.0, ..SdpOptions::default() };
        assert!(solve_sdp(&g, 0.25, &bad).is_err());
    }
}
