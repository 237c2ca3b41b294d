//! Concave minimisation of the Z-form relaxation for `0 < p < 2`.
//!
//! The objective `2^(-p/2) sum_E z_ij^(p/2)` is concave and the feasible set
//! (unit diagonal, `1 - Z` PSD, spread, triangles `f(z_ij, z_jk) >= z_ik`) is
//! convex, so a linearisation step never lands above the tangent plane and a
//! full step to the subproblem's minimiser is always at least as good in the
//! model. Multistart successive linearisation from cut points and the p = 2
//! solution gives a certified local minimum that is never worse than its
//! best start.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{min_eigenvalue, z_spread_bound, FeasibilityReport, ZForm};
use crate::engine::{self, EngineOptions, EngineResult, LinearConstraint, Problem};
use crate::graph::{
    balanced_cuts_by_size, ensure_balance_feasible, exact_balanced_separator, is_c_balanced,
    random_balanced_cut, Cut, Graph, DEFAULT_BRUTE_FORCE_CAP,
};
use crate::rng::derived_rng;
use crate::sdp::{solve_sdp, spread_constraint, SdpOptions, SolveReport};
use crate::triangles::{self, f_q, TriangleSeparator};
use crate::{Error, Result};

/// Largest instance the concave solver accepts.
pub const CONCAVE_VERTEX_CAP: usize = 24;

/// Up to this size the cut starts are the cheapest balanced cuts; above it
/// they are the exact optimum (while enumerable) plus random balanced cuts.
const ENUMERATED_STARTS_CAP: usize = 12;

/// Gradient of `z^(p/2)` is evaluated no closer to zero than this.
const Z_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcaveOptions {
    /// Cut-seeded starts; the p = 2 solution is always tried as well.
    pub starts: usize,
    /// Feasibility tolerance of each subproblem and the improvement a
    /// linearisation step must achieve to be taken.
    pub inner_tol: f64,
    pub max_outer: usize,
    /// Iteration cap of each subproblem.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ConcaveOptions {
    fn default() -> Self {
        ConcaveOptions { starts: 8, inner_tol: 1e-6, max_outer: 50, max_iter: 50_000, seed: 0 }
    }
}

impl ConcaveOptions {
    fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::InvalidParameter("starts must be at least 1".into()));
        }
        if !(self.inner_tol > 0.0 && self.inner_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("inner_tol must be positive, got {}", self.inner_tol)));
        }
        if self.max_outer == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_outer and max_iter must be positive".into()));
        }
        Ok(())
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("concave solver needs 0 < p < 2, got {p}")))
    }
}

/// Objective on a raw Z matrix.
fn value_of(g: &Graph, z: &DMatrix<f64>, p: f64) -> f64 {
    g.edges().iter().map(|&(i, j)| crate::embedding::z_term(z[(i, j)], p)).sum()
}

/// Z-form feasibility: triangles and spread in Z units, PSD of `1 - Z`.
pub(crate) fn z_feasibility(z: &DMatrix<f64>, p: f64, c: f64, tol: f64) -> FeasibilityReport {
    let n = z.nrows();
    let max_unit_violation = (0..n).map(|i| z[(i, i)].abs()).fold(0.0, f64::max);
    let max_triangle_violation = triangles::max_violation(z, p).max(0.0);
    let total: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| z[(i, j)]).sum();
    let spread_slack = total - z_spread_bound(n, c);
    let psd_ok = min_eigenvalue(&z.map(|v| 1.0 - v)) >= -crate::embedding::Tolerances::default().psd;
    FeasibilityReport {
        max_unit_violation,
        max_triangle_violation,
        spread_slack,
        feasible: max_unit_violation <= tol && max_triangle_violation <= tol && spread_slack >= -tol && psd_ok,
    }
}

/// Z of the cut embedding: 0 within sides, 2 across.
pub fn feasible_point_from_cut(g: &Graph, s: &Cut, c: f64) -> Result<ZForm> {
    if s.n() != g.n() {
        return Err(Error::InvalidParameter("cut and graph disagree on n".into()));
    }
    if !is_c_balanced(g, s, c) {
        return Err(Error::UnbalancedCut { size: s.len(), n: g.n(), c });
    }
    Ok(ZForm::from_matrix_unchecked(cut_z(s)))
}

fn cut_z(s: &Cut) -> DMatrix<f64> {
    let n = s.n();
    DMatrix::from_fn(n, n, |i, j| if s.contains(i) != s.contains(j) { 2.0 } else { 0.0 })
}

/// Stationarity target for the linearised steps. Each step only has to be a
/// feasible descent point; the acceptance test is on the true objective.
const LINEARISED_OPT_TOL: f64 = 1e-3;

/// Tangent cuts are valid for the whole feasible set, so the latest cut per
/// triangle is carried from one subproblem to the next.
#[derive(Default)]
struct CutPool {
    cuts: HashMap<(usize, usize, usize), LinearConstraint>,
}

fn solve_linear(
    grad: &DMatrix<f64>,
    c: f64,
    p: f64,
    x0: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
    pool: &mut CutPool,
) -> EngineResult {
    let n = grad.nrows();
    let cost = DMatrix::from_fn(n, n, |i, j| if i < j { 0.5 * (grad[(i, j)] + grad[(j, i)]) } else { 0.0 });
    let mut constraints = vec![spread_constraint(n, c)];
    let mut keys: Vec<_> = pool.cuts.keys().copied().collect();
    keys.sort_unstable();
    constraints.extend(keys.iter().map(|k| pool.cuts[k].clone()));
    let problem = Problem { n, cost, constraints };
    let mut separator = TriangleSeparator::new(p);
    let r = engine::solve(&problem, &mut separator, x0, EngineOptions { tol, max_iter, batch: n, opt_tol: Some(LINEARISED_OPT_TOL) });
    for cut in &r.cuts {
        if let Some(k) = cut.key {
            pool.cuts.insert(k, cut.clone());
        }
    }
    r
}

/// Minimises `<grad, Z>` over the Z-feasible set at exponent `p`.
pub fn linear_subproblem(grad: &DMatrix<f64>, g: &Graph, c: f64, p: f64, inner_tol: f64) -> Result<ZForm> {
    let n = g.n();
    if grad.nrows() != n || grad.ncols() != n {
        return Err(Error::InvalidParameter("gradient shape does not match the graph".into()));
    }
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 2], got {p}")));
    }
    if !(inner_tol > 0.0) {
        return Err(Error::InvalidParameter("inner_tol must be positive".into()));
    }
    ensure_balance_feasible(n, c)?;
    let mut pool = CutPool::default();
    let r = solve_linear(grad, c, p, &DMatrix::identity(n, n), inner_tol, ConcaveOptions::default().max_iter, &mut pool);
    if r.residual > inner_tol {
        return Err(Error::NonConverged {
            iterations: r.iterations,
            residual: r.residual,
            best: Some(Box::new(crate::embedding::GramForm::from_matrix_unchecked(r.x))),
        });
    }
    Ok(ZForm::from_matrix_unchecked(r.z()))
}

/// Gradient of the objective with `z` floored at [`Z_FLOOR`].
fn surrogate_gradient(g: &Graph, z: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let n = g.n();
    let scale = 0.5 * p * 2f64.powf(-0.5 * p);
    let mut grad = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let v = scale * z[(i, j)].max(Z_FLOOR).powf(0.5 * p - 1.0);
        grad[(i, j)] = v;
        grad[(j, i)] = v;
    }
    grad
}

struct Descent {
    z: DMatrix<f64>,
    value: f64,
    iterations: usize,
    lazy: usize,
    certified: bool,
}

/// Successive linearisation with full steps from a feasible start.
fn descend(g: &Graph, c: f64, p: f64, start: DMatrix<f64>, opts: &ConcaveOptions, pool: &mut CutPool) -> Descent {
    let mut z = start;
    let mut value = value_of(g, &z, p);
    let mut iterations = 0;
    let mut lazy = 0;
    let mut certified = false;
    for _ in 0..opts.max_outer {
        let grad = surrogate_gradient(g, &z, p);
        let x0 = z.map(|v| 1.0 - v);
        let r = solve_linear(&grad, c, p, &x0, opts.inner_tol, opts.max_iter, pool);
        iterations += r.iterations;
        lazy += r.lazy_constraints;
        if r.residual > opts.inner_tol {
            break;
        }
        let next = r.z();
        let next_value = value_of(g, &next, p);
        if next_value < value - opts.inner_tol {
            z = next;
            value = next_value;
        } else {
            certified = true;
            break;
        }
    }
    Descent { z, value, iterations, lazy, certified }
}

/// Cut-seeded starting points.
fn cut_starts(g: &Graph, c: f64, opts: &ConcaveOptions) -> Result<Vec<Cut>> {
    let n = g.n();
    let mut cuts: Vec<Cut> = Vec::new();
    let push = |cut: Cut, cuts: &mut Vec<Cut>| {
        // A cut and its complement give the same Z.
        let canon = if cut.contains(0) { cut } else { cut.complement() };
        if !cuts.contains(&canon) {
            cuts.push(canon);
        }
    };
    if n <= ENUMERATED_STARTS_CAP {
        for (cut, _) in balanced_cuts_by_size(g, c, ENUMERATED_STARTS_CAP)? {
            if cuts.len() >= opts.starts {
                break;
            }
            push(cut, &mut cuts);
        }
        return Ok(cuts);
    }
    if n <= DEFAULT_BRUTE_FORCE_CAP {
        push(exact_balanced_separator(g, c)?.0, &mut cuts);
    }
    let mut rng = derived_rng(opts.seed, "concave-start", 0);
    let mut attempts = 0;
    while cuts.len() < opts.starts && attempts < 64 * opts.starts {
        push(random_balanced_cut(n, c, &mut rng)?, &mut cuts);
        attempts += 1;
    }
    Ok(cuts)
}

/// Multistart successive linearisation. The returned value is never above
/// the value of any start.
pub fn solve_concave(g: &Graph, c: f64, p: f64, opts: &ConcaveOptions) -> Result<(ZForm, SolveReport)> {
    check_exponent(p)?;
    opts.validate()?;
    let n = g.n();
    if n > CONCAVE_VERTEX_CAP {
        return Err(Error::SolverCap { n, cap: CONCAVE_VERTEX_CAP });
    }
    ensure_balance_feasible(n, c)?;
    let timer = Instant::now();

    let mut starts: Vec<DMatrix<f64>> = cut_starts(g, c, opts)?.iter().map(cut_z).collect();
    let mut iterations = 0;
    let sdp_opts = SdpOptions { tol: opts.inner_tol, max_iter: opts.max_iter, seed: opts.seed, ..SdpOptions::default() };
    match solve_sdp(g, c, &sdp_opts) {
        Ok((x, report)) => {
            iterations += report.iterations;
            let z = engine::z_of(x.matrix());
            if z_feasibility(&z, p, c, opts.inner_tol).feasible {
                starts.push(z);
            }
        }
        Err(Error::NonConverged { iterations: it, .. }) => iterations += it,
        Err(e) => return Err(e),
    }

    let mut best: Option<(usize, Descent)> = None;
    let mut lazy = 0;
    let mut pool = CutPool::default();
    for (index, start) in starts.into_iter().enumerate() {
        let d = descend(g, c, p, start, opts, &mut pool);
        iterations += d.iterations;
        lazy += d.lazy;
        // Strict improvement keeps the lowest index on ties.
        if best.as_ref().is_none_or(|(_, b)| d.value < b.value) {
            best = Some((index, d));
        }
    }
    let (index, best) = best.expect("at least one cut start exists");
    let report = SolveReport {
        value: best.value,
        residuals: z_feasibility(&best.z, p, c, opts.inner_tol),
        iterations,
        wall_time_secs: timer.elapsed().as_secs_f64(),
        seed: opts.seed,
        converged: best.certified,
        start_index: Some(index),
        lazy_constraints: lazy,
    };
    Ok((ZForm::from_matrix_unchecked(best.z), report))
}

/// Second partials of `f(x, y) = (x^(1/q) + y^(1/q))^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianSample {
    pub x: f64,
    pub y: f64,
    pub q: f64,
    pub h: [[f64; 2]; 2],
}

impl HessianSample {
    /// Eigenvalues, smallest first. `H` is rank one, so the larger eigenvalue
    /// is computed as `det / lambda_min` to avoid cancellation.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.h;
        let half_trace = 0.5 * (a + d);
        let radius = (0.5 * (a - d)).hypot(b);
        let det = a.mul_add(d, -b * b);
        if half_trace <= 0.0 {
            let low = half_trace - radius;
            let high = if low != 0.0 { det / low } else { 0.0 };
            [low, high]
        } else {
            let high = half_trace + radius;
            [det / high, high]
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues()[1]
    }

    /// `[alpha, beta] H [alpha, beta]^T`.
    pub fn quadratic_form(&self, alpha: f64, beta: f64) -> f64 {
        let [[a, b], [_, d]] = self.h;
        alpha * alpha * a + 2.0 * alpha * beta * b + beta * beta * d
    }
}

fn check_hessian_domain(x: f64, y: f64, q: f64) -> Result<()> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
    }
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::Domain(format!("derivatives of f do not exist at ({x}, {y})")));
    }
    Ok(())
}

/// Closed-form Hessian of `f`. With `r = (y/x)^(1/q)`:
/// `f_xx = -((q-1)/q) (1 + r)^(q-2) y^(1/q) / x^((q+1)/q)`, symmetrically for
/// `f_yy`, and `f_xy = ((q-1)/q) (x^(-1/q) + y^(-1/q))^(q-2) / (xy)^(1/q)`.
pub fn hessian_f(x: f64, y: f64, q: f64) -> Result<HessianSample> {
    check_hessian_domain(x, y, q)?;
    let k = (q - 1.0) / q;
    let (xr, yr) = (x.powf(1.0 / q), y.powf(1.0 / q));
    let fxx = -k * (1.0 + yr / xr).powf(q - 2.0) * yr / x.powf((q + 1.0) / q);
    let fyy = -k * (1.0 + xr / yr).powf(q - 2.0) * xr / y.powf((q + 1.0) / q);
    let fxy = k * (1.0 / xr + 1.0 / yr).powf(q - 2.0) / (xr * yr);
    let sample = HessianSample { x, y, q, h: [[fxx, fxy], [fxy, fyy]] };
    if sample.h.iter().flatten().all(|v| v.is_finite()) {
        Ok(sample)
    } else {
        Err(Error::Domain(format!("Hessian overflows at ({x}, {y})")))
    }
}

/// [`hessian_f`] with the ratio inside the diagonal `(q-2)` powers inverted,
/// a commonly seen slip. Agrees with it only when `q = 2` or `x = y`; kept so
/// the discrepancy can be measured.
pub fn hessian_f_swapped_ratio(x: f64, y: f64, q: f64) -> Result<HessianSample> {
    let mut s = hessian_f(x, y, q)?;
    let k = (q - 1.0) / q;
    let (xr, yr) = (x.powf(1.0 / q), y.powf(1.0 / q));
    s.h[0][0] = -k * (1.0 + xr / yr).powf(q - 2.0) * yr / x.powf((q + 1.0) / q);
    s.h[1][1] = -k * (1.0 + yr / xr).powf(q - 2.0) * xr / y.powf((q + 1.0) / q);
    Ok(s)
}

/// Factored quadratic form
/// `-((q-1)/q) s^(q-2) (alpha y - beta x)^2 / (xy)^((2q-1)/q)`, `s = x^(1/q) + y^(1/q)`.
pub fn factored_quadratic_form(x: f64, y: f64, q: f64, alpha: f64, beta: f64) -> f64 {
    let s = x.powf(1.0 / q) + y.powf(1.0 / q);
    let w = alpha * y - beta * x;
    -((q - 1.0) / q) * s.powf(q - 2.0) * w * w / (x * y).powf((2.0 * q - 1.0) / q)
}

/// The same expression with an `s^q` prefactor in place of `s^(q-2)`.
pub fn factored_quadratic_form_sq(x: f64, y: f64, q: f64, alpha: f64, beta: f64) -> f64 {
    let s = x.powf(1.0 / q) + y.powf(1.0 / q);
    factored_quadratic_form(x, y, q, alpha, beta) * s * s
}

/// Central second differences of `f`.
fn hessian_fd(x: f64, y: f64, q: f64) -> [[f64; 2]; 2] {
    let f = |a: f64, b: f64| f_q(a, b, q);
    let (hx, hy) = (1e-4 * x, 1e-4 * y);
    let fxx = (f(x + hx, y) - 2.0 * f(x, y) + f(x - hx, y)) / (hx * hx);
    let fyy = (f(x, y + hy) - 2.0 * f(x, y) + f(x, y - hy)) / (hy * hy);
    let fxy = (f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy)) / (4.0 * hx * hy);
    [[fxx, fxy], [fxy, fyy]]
}

fn matrix_rel_error(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().flatten().zip(b.iter().flatten()).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
    if scale > 0.0 { diff / scale } else { diff }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub q: f64,
    pub samples: usize,
    pub max_eigenvalue: f64,
    /// Largest entrywise error against finite differences, relative to the
    /// largest entry of `H`.
    pub max_fd_rel_error: f64,
    /// Largest gap between `a'Ha` and the factored form, relative to
    /// `a^2|f_xx| + 2|ab||f_xy| + b^2|f_yy|`.
    pub max_factored_rel_error: f64,
    /// The same two errors for the swapped-ratio diagonal and the `s^q` prefactor (informational).
    pub swapped_fd_rel_error: f64,
    pub sq_factored_rel_error: f64,
    pub passed: bool,
    /// First sample that failed a check.
    pub witness: Option<(f64, f64)>,
}

pub const EIGENVALUE_TOL: f64 = 1e-8;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FACTORED_REL_TOL: f64 = 1e-6;

/// Samples `(x, y)` uniformly in `(0, 2]^2` and checks negative
/// semidefiniteness, agreement with finite differences and the factored form.
pub fn check_concavity(q: f64, samples: usize, seed: u64) -> Result<ConcavityReport> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
    }
    let mut rng = derived_rng(seed, "concavity", 0);
    let mut report = ConcavityReport {
        q,
        samples,
        max_eigenvalue: f64::NEG_INFINITY,
        max_fd_rel_error: 0.0,
        max_factored_rel_error: 0.0,
        swapped_fd_rel_error: 0.0,
        sq_factored_rel_error: 0.0,
        passed: true,
        witness: None,
    };
    for _ in 0..samples {
        let x = 2.0 * (1.0 - rng.random::<f64>());
        let y = 2.0 * (1.0 - rng.random::<f64>());
        let alpha: f64 = rng.sample(StandardNormal);
        let beta: f64 = rng.sample(StandardNormal);
        let h = hessian_f(x, y, q)?;
        let swapped = hessian_f_swapped_ratio(x, y, q)?;
        let fd = hessian_fd(x, y, q);

        let eig = h.max_eigenvalue();
        let fd_err = matrix_rel_error(&fd, &h.h);
        let [[a, b], [_, d]] = h.h;
        let scale = alpha * alpha * a.abs() + 2.0 * (alpha * beta * b).abs() + beta * beta * d.abs();
        let fac_err = (h.quadratic_form(alpha, beta) - factored_quadratic_form(x, y, q, alpha, beta)).abs() / scale;

        report.max_eigenvalue = report.max_eigenvalue.max(eig);
        report.max_fd_rel_error = report.max_fd_rel_error.max(fd_err);
        report.max_factored_rel_error = report.max_factored_rel_error.max(fac_err);
        report.swapped_fd_rel_error = report.swapped_fd_rel_error.max(matrix_rel_error(&fd, &swapped.h));
        report.sq_factored_rel_error = report.sq_factored_rel_error.max(
            (h.quadratic_form(alpha, beta) - factored_quadratic_form_sq(x, y, q, alpha, beta)).abs() / scale,
        );
        if eig > EIGENVALUE_TOL || fd_err > FD_REL_TOL || fac_err > FACTORED_REL_TOL {
            report.passed = false;
            report.witness.get_or_insert((x, y));
        }
    }
    Ok(report)
}

/// Default grid spacing of [`grid_oracle_n3`].
pub const GRID_RESOLUTION: f64 = 0.02;

/// Brute-force minimum of the Z-form objective on a 3-vertex graph over a
/// grid of `(z01, z02, z12)` in `[0, 2]^3`.
pub fn grid_oracle_n3(g: &Graph, c: f64, p: f64, resolution: f64) -> Result<f64> {
    if g.n() != 3 {
        return Err(Error::InvalidParameter(format!("grid oracle needs n = 3, got {}", g.n())));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolution must be positive, got {resolution}")));
    }
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 2], got {p}")));
    }
    ensure_balance_feasible(3, c)?;
    let steps = (2.0 / resolution + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * resolution).collect();
    let bound = z_spread_bound(3, c);
    let h = 0.5 * p;
    let ok_triangle = |a: f64, b: f64, c: f64| a.powf(h) + b.powf(h) >= c.powf(h) - 1e-12;
    let weight = |i: usize, j: usize| if g.has_edge(i, j) { 1.0 } else { 0.0 };
    let (w01, w02, w12) = (weight(0, 1), weight(0, 2), weight(1, 2));
    let mut best = f64::INFINITY;
    for &a in &grid {
        for &b in &grid {
            for &d in &grid {
                // a = z01, b = z02, d = z12.
                if a + b + d < bound - 1e-12 {
                    continue;
                }
                if !(ok_triangle(a, d, b) && ok_triangle(a, b, d) && ok_triangle(b, d, a)) {
                    continue;
                }
                let (x01, x02, x12) = (1.0 - a, 1.0 - b, 1.0 - d);
                let det = 1.0 + 2.0 * x01 * x02 * x12 - x01 * x01 - x02 * x02 - x12 * x12;
                if det < -1e-9 {
                    continue;
                }
                let v = w01 * crate::embedding::z_term(a, p)
                    + w02 * crate::embedding::z_term(b, p)
                    + w12 * crate::embedding::z_term(d, p);
                best = best.min(v);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::InfeasibleBalance { n: 3, c })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::objective_z;
    use proptest::prelude::*;

    fn opts() -> ConcaveOptions {
        ConcaveOptions { starts: 4, ..ConcaveOptions::default() }
    }

    #[test]
    fn cycle_four_is_bounded_by_the_optimal_cut() {
        let g = Graph::cycle(4).unwrap();
        let (z, r) = solve_concave(&g, 0.25, 1.0, &opts()).unwrap();
        assert!(r.value <= 2.0 + 1e-5, "{r:?}");
        assert!(r.residuals.feasible, "{r:?}");
        assert!((objective_z(&g, &z, 1.0, 1e-9).unwrap() - r.value).abs() < 1e-12);
    }

    #[test]
    fn complete_four_is_bounded_by_the_optimal_cut() {
        let g = Graph::complete(4).unwrap();
        let (_, r) = solve_concave(&g, 0.25, 1.0, &opts()).unwrap();
        assert!(r.value <= 4.0 + 1e-5, "{r:?}");
    }

    #[test]
    fn triangle_matches_grid_oracle() {
        let g = Graph::complete(3).unwrap();
        let grid = grid_oracle_n3(&g, 0.25, 1.0, GRID_RESOLUTION).unwrap();
        let (_, r) = solve_concave(&g, 0.25, 1.0, &opts()).unwrap();
        assert!((r.value - grid).abs() <= 3.0 * GRID_RESOLUTION, "{} vs {grid}", r.value);
    }

    #[test]
    fn returned_point_is_a_local_minimum() {
        let g = Graph::cycle(6).unwrap();
        let o = opts();
        let (z, r) = solve_concave(&g, 0.25, 0.5, &o).unwrap();
        assert!(r.converged);
        let grad = surrogate_gradient(&g, z.matrix(), 0.5);
        let x0 = z.matrix().map(|v| 1.0 - v);
        let step = solve_linear(&grad, 0.25, 0.5, &x0, o.inner_tol, o.max_iter, &mut CutPool::default());
        assert!(value_of(&g, &step.z(), 0.5) >= r.value - o.inner_tol);
    }

    #[test]
    fn solver_rejects_bad_exponents_and_sizes() {
        let g = Graph::cycle(4).unwrap();
        assert!(matches!(solve_concave(&g, 0.25, 2.0, &opts()), Err(Error::InvalidParameter(_))));
        assert!(matches!(solve_concave(&g, 0.25, 0.0, &opts()), Err(Error::InvalidParameter(_))));
        let big = Graph::empty(25).unwrap();
        assert!(matches!(solve_concave(&big, 0.25, 1.0, &opts()), Err(Error::SolverCap { .. })));
        let zero = ConcaveOptions { starts: 0, ..opts() };
        assert!(solve_concave(&g, 0.25, 1.0, &zero).is_err());
    }

    #[test]
    fn cut_point_examples() {
        let g = Graph::cycle(4).unwrap();
        let z = feasible_point_from_cut(&g, &Cut::new(4, [0, 1]).unwrap(), 0.25).unwrap();
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 2.0, 2.0, //
            0.0, 0.0, 2.0, 2.0, //
            2.0, 2.0, 0.0, 0.0, //
            2.0, 2.0, 0.0, 0.0,
        ]);
        assert_eq!(z.matrix(), &expected);
        assert_eq!(objective_z(&g, &z, 1.0, 0.0).unwrap(), 2.0);

        let pair = Graph::new(2, [(0, 1)]).unwrap();
        let z = feasible_point_from_cut(&pair, &Cut::new(2, [0]).unwrap(), 0.25).unwrap();
        assert_eq!(z.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
        assert_eq!(objective_z(&pair, &z, 0.5, 0.0).unwrap(), 1.0);

        let empty = Cut::new(4, []).unwrap();
        assert!(matches!(feasible_point_from_cut(&g, &empty, 0.25), Err(Error::UnbalancedCut { .. })));
    }

    #[test]
    fn linear_subproblem_two_vertex_examples() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let positive = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let z = linear_subproblem(&positive, &g, 0.25, 1.0, 1e-6).unwrap();
        // Spread forces z01 >= 2c(1-c) n^2 = 1.5.
        assert!((z.get(0, 1) - 1.5).abs() < 1e-4, "{}", z.get(0, 1));

        let negative = -positive;
        let z = linear_subproblem(&negative, &g, 0.25, 1.0, 1e-6).unwrap();
        assert!((z.get(0, 1) - 2.0).abs() < 1e-4, "{}", z.get(0, 1));

        let zero = DMatrix::zeros(2, 2);
        let z = linear_subproblem(&zero, &g, 0.25, 1.0, 1e-6).unwrap();
        assert!(z_feasibility(z.matrix(), 1.0, 0.25, 1e-6).feasible);
    }

    #[test]
    fn hessian_examples() {
        let h = hessian_f(1.0, 1.0, 2.0).unwrap();
        assert_eq!(h.h, [[-0.5, 0.5], [0.5, -0.5]]);
        let [low, high] = h.eigenvalues();
        assert!((low + 1.0).abs() < 1e-15 && high.abs() < 1e-15);

        let h = hessian_f(0.7, 0.7, 2.0).unwrap();
        assert_eq!(h.h[0][0], h.h[1][1]);

        assert!(matches!(hessian_f(1.0, 0.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(hessian_f(1.0, 1.0, 0.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn swapped_diagonal_differs_off_the_symmetric_line() {
        let fd = hessian_fd(0.3, 1.2, 4.0);
        let good = hessian_f(0.3, 1.2, 4.0).unwrap();
        let swapped = hessian_f_swapped_ratio(0.3, 1.2, 4.0).unwrap();
        assert!(matrix_rel_error(&fd, &good.h) < 1e-5);
        assert!(matrix_rel_error(&fd, &swapped.h) > 1e-2);
        // At q = 2 the two coincide.
        assert_eq!(hessian_f(0.3, 1.2, 2.0).unwrap(), hessian_f_swapped_ratio(0.3, 1.2, 2.0).unwrap());
    }

    #[test]
    fn concavity_check_passes() {
        for q in [2.0, 4.0 / 3.0, 4.0] {
            let r = check_concavity(q, 1000, 11).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(check_concavity(0.5, 10, 0).is_err());
    }

    #[test]
    fn grid_oracle_examples() {
        let empty = Graph::empty(3).unwrap();
        assert_eq!(grid_oracle_n3(&empty, 0.25, 1.0, 0.1).unwrap(), 0.0);
        let k3 = Graph::complete(3).unwrap();
        assert!(grid_oracle_n3(&k3, 0.25, 1.0, 0.0).is_err());
        assert!(grid_oracle_n3(&Graph::cycle(4).unwrap(), 0.25, 1.0, 0.1).is_err());
        // K3 at p = 2: three vectors at 120 degrees is the only way to meet
        // spread 2c(1-c) 9 = 3.375 cheaply; the grid finds about 1.6875.
        let v = grid_oracle_n3(&k3, 0.25, 2.0, GRID_RESOLUTION).unwrap();
        assert!((v - 1.6875).abs() <= 3.0 * GRID_RESOLUTION, "{v}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hessian_is_negative_semidefinite(x in 1e-6f64..2.0, y in 1e-6f64..2.0, q in 1.01f64..8.0) {
            let h = hessian_f(x, y, q).unwrap();
            prop_assert!(h.max_eigenvalue() <= 1e-8 * (1.0 + h.h[0][0].abs()));
        }

        #[test]
        fn cut_points_have_cut_size_objective(mask in 1u64..63, p in 0.1f64..2.0) {
            let g = Graph::complete_bipartite(3, 3).unwrap();
            let cut = Cut::from_mask(6, mask);
            if is_c_balanced(&g, &cut, 0.25) {
                let z = feasible_point_from_cut(&g, &cut, 0.25).unwrap();
                prop_assert_eq!(objective_z(&g, &z, p, 0.0).unwrap(), crate::graph::cut_size(&g, &cut) as f64);
            }
        }
    }
}
