//! Shared first-order solver core.
//!
//! Solves
//!
//! ```text
//! min  sum_{i<j} cost_ij z_ij
//! s.t. X = 1 - Z is PSD with unit diagonal,
//!      constant_l + sum coef_l,ij z_ij >= 0   for every linear constraint l,
//! ```
//!
//! by an augmented Lagrangian on the diagonal equalities and the linear
//! inequalities, with accelerated projected gradient (FISTA with backtracking
//! and function-value restarts) on the PSD cone for the inner problems. The
//! PSD projection is a spectral decomposition with negative eigenvalues
//! clipped.
//!
//! Constraint families too large to list (triangle inequalities) enter
//! lazily through a [`Separator`]: after each solve the separator is asked
//! for violated constraints, which are appended before re-solving. The final
//! iterate is retracted onto the elliptope by a diagonal rescaling, so the
//! returned matrix is PSD with an exactly unit diagonal and only the linear
//! constraints carry residuals.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

/// `constant + sum coef * z_ij >= 0`, pairs stored with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, usize, f64)>,
    pub constant: f64,
    /// Cuts sharing a key replace each other instead of accumulating.
    pub key: Option<(usize, usize, usize)>,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(usize, usize, f64)>, constant: f64) -> Self {
        let terms = terms.into_iter().map(|(i, j, c)| (i.min(j), i.max(j), c)).collect();
        LinearConstraint { terms, constant, key: None }
    }

    /// Value at `z` (positive means satisfied with slack).
    pub fn value(&self, z: &DMatrix<f64>) -> f64 {
        self.constant + self.terms.iter().map(|&(i, j, c)| c * z[(i, j)]).sum::<f64>()
    }

    pub fn with_key(mut self, key: (usize, usize, usize)) -> Self {
        self.key = Some(key);
        self
    }

    fn norm(&self) -> f64 {
        self.terms.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt()
    }
}

/// Supplies lazily generated constraints.
pub trait Separator {
    /// Up to `limit` constraints violated at `z` by more than `tol`, worst first.
    fn separate(&mut self, z: &DMatrix<f64>, tol: f64, limit: usize) -> Vec<LinearConstraint>;

    /// Largest violation of the constraint family this separator represents.
    fn max_violation(&self, z: &DMatrix<f64>) -> f64;
}

/// Separator for problems with no lazy family.
pub struct NoSeparator;

impl Separator for NoSeparator {
    fn separate(&mut self, _: &DMatrix<f64>, _: f64, _: usize) -> Vec<LinearConstraint> {
        Vec::new()
    }

    fn max_violation(&self, _: &DMatrix<f64>) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub n: usize,
    /// Only entries with `i < j` are read.
    pub cost: DMatrix<f64>,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct EngineOptions {
    /// Feasibility and optimality tolerance for the returned point.
    pub tol: f64,
    /// Cap on inner gradient iterations over the whole solve.
    pub max_iter: usize,
    /// Lazy constraints added per separation round.
    pub batch: usize,
    /// Stationarity target; `None` means `0.01 * sqrt(tol)`.
    pub opt_tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EngineResult {
    /// PSD with unit diagonal.
    pub x: DMatrix<f64>,
    pub iterations: usize,
    pub rounds: usize,
    /// Largest violation of the explicit and lazy constraints at `x`.
    pub residual: f64,
    pub converged: bool,
    pub lazy_constraints: usize,
    /// The separated cuts, in the order they were added.
    pub cuts: Vec<LinearConstraint>,
}

impl EngineResult {
    pub fn z(&self) -> DMatrix<f64> {
        z_of(&self.x)
    }
}

pub(crate) fn z_of(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = x.map(|v| 1.0 - v);
    z.fill_diagonal(0.0);
    z
}

/// Projection onto the PSD cone in the Frobenius norm.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam > 0.0 {
            let u = eig.eigenvectors.column(k);
            out.ger(lam, &u, &u, 1.0);
        }
    }
    (&out + out.transpose()) * 0.5
}

/// Rescales a PSD matrix to unit diagonal, `x_ij / sqrt(x_ii x_jj)`.
pub fn unit_diagonal(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let scale: Vec<f64> = (0..n).map(|i| if x[(i, i)] > 0.0 { 1.0 / x[(i, i)].sqrt() } else { 0.0 }).collect();
    let mut out = DMatrix::from_fn(n, n, |i, j| (x[(i, j)] * scale[i] * scale[j]).clamp(-1.0, 1.0));
    for i in 0..n {
        if scale[i] == 0.0 {
            // A zero row means an unconstrained direction; use a fresh axis.
            for j in 0..n {
                out[(i, j)] = 0.0;
                out[(j, i)] = 0.0;
            }
        }
        out[(i, i)] = 1.0;
    }
    out
}

/// Normalised inequality in x-coordinates: `offset + sum a_t x_t >= 0`.
struct Row {
    terms: Vec<(usize, usize, f64)>,
    offset: f64,
}

impl Row {
    fn from_constraint(c: &LinearConstraint) -> Option<Self> {
        let norm = c.norm();
        if norm == 0.0 {
            return None;
        }
        let offset = (c.constant + c.terms.iter().map(|t| t.2).sum::<f64>()) / norm;
        let terms = c.terms.iter().map(|&(i, j, a)| (i, j, -a / norm)).collect();
        Some(Row { terms, offset })
    }

    fn value(&self, x: &DMatrix<f64>) -> f64 {
        self.offset + self.terms.iter().map(|&(i, j, a)| a * x[(i, j)]).sum::<f64>()
    }
}

struct Lagrangian<'a> {
    n: usize,
    /// Objective coefficients on `x_ij` pairs (already scaled).
    obj: &'a DMatrix<f64>,
    rows: &'a [Row],
    lambda: &'a [f64],
    mu: &'a [f64],
    rho: f64,
    /// Proximal centre and weight `1 / sigma`.
    center: &'a DMatrix<f64>,
    sigma: f64,
}

impl Lagrangian<'_> {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                v += self.obj[(i, j)] * x[(i, j)];
            }
            let h = x[(i, i)] - 1.0;
            v += self.mu[i] * h + 0.5 * self.rho * h * h;
        }
        for (row, &lam) in self.rows.iter().zip(self.lambda) {
            let shifted = (lam - self.rho * row.value(x)).max(0.0);
            v += (shifted * shifted - lam * lam) / (2.0 * self.rho);
        }
        v + (x - self.center).norm_squared() / (2.0 * self.sigma)
    }

    /// Frobenius gradient.
    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut pair = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                pair[(i, j)] = self.obj[(i, j)];
            }
        }
        for (row, &lam) in self.rows.iter().zip(self.lambda) {
            let w = (lam - self.rho * row.value(x)).max(0.0);
            if w > 0.0 {
                for &(i, j, a) in &row.terms {
                    pair[(i, j)] -= a * w;
                }
            }
        }
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            g[(i, i)] = self.mu[i] + self.rho * (x[(i, i)] - 1.0);
            for j in i + 1..n {
                g[(i, j)] = 0.5 * pair[(i, j)];
                g[(j, i)] = 0.5 * pair[(i, j)];
            }
        }
        g + (x - self.center) / self.sigma
    }
}

struct InnerOutcome {
    x: DMatrix<f64>,
    iterations: usize,
}

/// Range of the proximal step; it grows while inner solves stay cheap.
const SIGMA_MIN: f64 = 1e-2;
const SIGMA_MAX: f64 = 1e4;
const INNER_EASY: usize = 150;
const INNER_HARD: usize = 600;
/// Separation level at which optimisation hands over to the feasibility polish.
const POLISH_LEVEL: f64 = 1e-4;
/// Inner iterations allowed per multiplier update.
const INNER_CAP: usize = 2000;

/// FISTA with backtracking on the PSD cone, warm-started at `x0`.
fn inner_solve(lag: &Lagrangian, x0: &DMatrix<f64>, lip: &mut f64, eps: f64, budget: usize) -> InnerOutcome {
    let mut x = x0.clone();
    let mut y = x.clone();
    let mut phi_x = lag.value(&x);
    let mut t = 1.0f64;
    let mut restarted = false;
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let phi_y = lag.value(&y);
        let grad = lag.gradient(&y);
        let (x_new, phi_new, step_norm) = loop {
            let cand = project_psd(&(&y - &grad * (1.0 / *lip)));
            let d = &cand - &y;
            let d2 = d.norm_squared();
            let phi_c = lag.value(&cand);
            let model = phi_y + grad.dot(&d) + 0.5 * *lip * d2;
            if phi_c <= model + 1e-12 * (1.0 + phi_y.abs()) || *lip > 1e14 {
                break (cand, phi_c, d2.sqrt());
            }
            *lip *= 2.0;
        };
        let mapping = *lip * step_norm;
        if phi_new > phi_x && !restarted {
            // Function-value restart.
            t = 1.0;
            y = x.clone();
            restarted = true;
            if mapping <= eps {
                break;
            }
            continue;
        }
        restarted = false;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_next);
        x = x_new;
        phi_x = phi_new;
        t = t_next;
        if mapping <= eps {
            break;
        }
    }
    InnerOutcome { x, iterations }
}

/// Largest violation of the explicit constraints at `z`.
fn explicit_violation(constraints: &[LinearConstraint], z: &DMatrix<f64>) -> f64 {
    constraints.iter().map(|c| (-c.value(z)).max(0.0)).fold(0.0, f64::max)
}

/// Runs the augmented Lagrangian with lazy separation from the warm start `x0`.
pub fn solve(problem: &Problem, separator: &mut dyn Separator, x0: &DMatrix<f64>, opts: EngineOptions) -> EngineResult {
    let n = problem.n;
    let scale = {
        let mut m = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                m = m.max(problem.cost[(i, j)].abs());
            }
        }
        if m > 0.0 { m } else { 1.0 }
    };
    // Objective in x: sum cost_ij (1 - x_ij) = const - sum cost_ij x_ij.
    let obj = DMatrix::from_fn(n, n, |i, j| if i < j { -problem.cost[(i, j)] / scale } else { 0.0 });

    let mut constraints = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    // key -> (constraint index, row index)
    let mut keyed: HashMap<(usize, usize, usize), (usize, usize)> = HashMap::new();
    for c in &problem.constraints {
        if let Some(row) = Row::from_constraint(c) {
            if let Some(k) = c.key {
                keyed.insert(k, (constraints.len(), rows.len()));
            }
            rows.push(row);
            constraints.push(c.clone());
        }
    }
    let mut lambda = vec![0.0; rows.len()];
    let mut mu = vec![0.0; n];
    let mut rho = 1.0f64;
    let mut lip = 1.0f64;
    let mut x = project_psd(x0);
    let mut iterations = 0usize;
    let mut rounds = 0usize;
    let mut lazy = 0usize;

    let target = 0.1 * opts.tol;
    let sep_tol = 0.5 * opts.tol;
    // Stationarity only moves the objective, never feasibility, so it gets a
    // looser threshold than the constraints.
    let opt_tol = opts.opt_tol.unwrap_or(0.01 * opts.tol.sqrt());
    let mut converged = false;
    // Separation happens whenever both residuals drop below `level`; the level
    // tightens once a round finds nothing new. Past `POLISH_LEVEL` the
    // objective is dropped and the point is projected onto the feasible set,
    // which is strongly convex and converges far faster than the tail of the
    // optimisation would.
    let mut level = 1e-2f64;
    let mut polish: Option<DMatrix<f64>> = None;
    let zero = DMatrix::zeros(n, n);
    let mut sigma = 1.0f64;
    let mut eps = 1e-2f64.max(opts.tol);
    let mut prev_residual = f64::INFINITY;

    // Extrapolated proximal centre (accelerated proximal point).
    let mut anchor = x.clone();
    let mut x_prev = x.clone();
    let mut momentum = 1.0f64;
    let mut prev_stationarity = f64::INFINITY;

    while iterations < opts.max_iter {
        let center = polish.clone().unwrap_or_else(|| anchor.clone());
        let objective = if polish.is_some() { &zero } else { &obj };
        let lag = Lagrangian { n, obj: objective, rows: &rows, lambda: &lambda, mu: &mu, rho, center: &center, sigma };
        let budget = INNER_CAP.min(opts.max_iter - iterations);
        lip = (lip * 0.5).max(1e-3);
        let out = inner_solve(&lag, &x, &mut lip, eps, budget);
        iterations += out.iterations;
        // Bound on the stationarity of the unregularised Lagrangian at the new
        // point: the prox displacement plus the inner solve's own tolerance.
        let stationarity = if polish.is_some() { 0.0 } else { (&out.x - &center).norm() / sigma + eps };
        x = out.x;

        let mut residual = 0.0f64;
        for i in 0..n {
            let h = x[(i, i)] - 1.0;
            mu[i] += rho * h;
            residual = residual.max(h.abs());
        }
        for (row, lam) in rows.iter().zip(lambda.iter_mut()) {
            let g = row.value(&x);
            *lam = (*lam - rho * g).max(0.0);
        }
        residual = residual.max(explicit_violation(&constraints, &z_of(&x)));

        if stationarity > prev_stationarity {
            momentum = 1.0;
            anchor = x.clone();
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            anchor = &x + (&x - &x_prev) * ((momentum - 1.0) / next);
            momentum = next;
        }
        prev_stationarity = stationarity;
        x_prev = x.clone();

        if polish.is_none() {
            if out.iterations < INNER_EASY {
                sigma = (sigma * 2.0).min(SIGMA_MAX);
            } else if out.iterations >= INNER_HARD {
                sigma = (sigma * 0.5).max(SIGMA_MIN);
            }
        }

        if polish.is_none() && iterations >= opts.max_iter - opts.max_iter / 5 {
            // Out of optimisation budget: spend the rest on feasibility.
            polish = Some(x.clone());
            lambda.iter_mut().for_each(|l| *l = 0.0);
            mu.iter_mut().for_each(|m| *m = 0.0);
            sigma = 1.0;
            prev_residual = f64::INFINITY;
            continue;
        }

        let threshold = if polish.is_some() { target } else { level };
        if residual <= threshold && stationarity <= level.max(opt_tol) {
            rounds += 1;
            let z = z_of(&unit_diagonal(&x));
            let cuts = separator.separate(&z, sep_tol, opts.batch.max(1));
            if cuts.is_empty() && polish.is_some() {
                converged = true;
                break;
            }
            // Moving the tangent of a triangle already in the set refines the
            // relaxation without adding a new face, so it does not hold the
            // level back.
            let fresh = cuts.iter().any(|c| c.key.is_none_or(|k| !keyed.contains_key(&k)));
            for cut in cuts {
                if let Some(row) = Row::from_constraint(&cut) {
                    if let Some(&(ci, ri)) = cut.key.and_then(|k| keyed.get(&k)) {
                        // Keep the multiplier as a warm start for the moved tangent.
                        rows[ri] = row;
                        constraints[ci] = cut;
                        continue;
                    }
                    if let Some(k) = cut.key {
                        keyed.insert(k, (constraints.len(), rows.len()));
                    }
                    rows.push(row);
                    lambda.push(0.0);
                    constraints.push(cut);
                    lazy += 1;
                }
            }
            if !fresh && polish.is_none() {
                if level <= POLISH_LEVEL && stationarity <= opt_tol {
                    polish = Some(x.clone());
                    lambda.iter_mut().for_each(|l| *l = 0.0);
                    mu.iter_mut().for_each(|m| *m = 0.0);
                    sigma = 1.0;
                    prev_residual = f64::INFINITY;
                    continue;
                }
                level = (level * 0.01).max(POLISH_LEVEL);
            }
        }

        if polish.is_some() {
            if residual > 0.25 * prev_residual && residual > target {
                rho = (rho * 5.0).min(1e7);
            }
        } else if residual > 0.25 * prev_residual && residual > target && residual > 0.1 * stationarity {
            // Residual balancing between primal feasibility and stationarity.
            rho = (rho * 5.0).min(1e7);
        } else if stationarity > 100.0 * residual.max(target) && rho > 1.0 {
            rho = (rho * 0.5).max(1.0);
        }
        prev_residual = residual;
        eps = (0.2 * stationarity.max(residual)).clamp(0.1 * opts.tol, 1e-2f64.max(opts.tol));
    }

    let x = unit_diagonal(&x);
    let z = z_of(&x);
    let residual = explicit_violation(&problem.constraints, &z)
        .max(explicit_violation(&constraints, &z))
        .max(separator.max_violation(&z));
    let cuts = constraints.into_iter().filter(|c| c.key.is_some()).collect();
    EngineResult { x, iterations, rounds, residual, converged: converged && residual <= opts.tol, lazy_constraints: lazy, cuts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> EngineOptions {
        EngineOptions { tol: 1e-6, max_iter: 50_000, batch: 8, opt_tol: None }
    }

    #[test]
    fn psd_projection_clips_negative_part() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = project_psd(&m);
        // Eigenvalues 3 and -1; the projection keeps 3 * uu^T with u = (1,1)/sqrt2.
        assert!((p - DMatrix::from_element(2, 2, 1.5)).amax() < 1e-12);
    }

    #[test]
    fn unit_diagonal_rescales() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 1.0]);
        let u = unit_diagonal(&m);
        assert_eq!(u[(0, 0)], 1.0);
        assert!((u[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_vertex_linear_program() {
        // min z01 s.t. z01 >= 1.5 on two vertices: optimum z01 = 1.5.
        let mut cost = DMatrix::zeros(2, 2);
        cost[(0, 1)] = 1.0;
        let problem = Problem {
            n: 2,
            cost,
            constraints: vec![LinearConstraint::new(vec![(0, 1, 1.0)], -1.5)],
        };
        let r = solve(&problem, &mut NoSeparator, &DMatrix::identity(2, 2), opts());
        assert!(r.converged, "{r:?}");
        assert!((r.z()[(0, 1)] - 1.5).abs() < 1e-5, "{}", r.z());

        // Maximising instead pushes against the elliptope: z01 = 2.
        let mut cost = DMatrix::zeros(2, 2);
        cost[(0, 1)] = -1.0;
        let problem = Problem { cost, ..problem };
        let r = solve(&problem, &mut NoSeparator, &DMatrix::identity(2, 2), opts());
        assert!(r.converged);
        assert!((r.z()[(0, 1)] - 2.0).abs() < 1e-5, "{}", r.z());
    }

    #[test]
    fn max_cut_like_problem_on_triangle() {
        // maximise sum z_ij over three unit vectors: optimum at 120 degrees, sum 4.5.
        let mut cost = DMatrix::zeros(3, 3);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            cost[(i, j)] = -1.0;
        }
        let problem = Problem { n: 3, cost, constraints: vec![] };
        let r = solve(&problem, &mut NoSeparator, &DMatrix::identity(3, 3), opts());
        assert!(r.converged);
        let z = r.z();
        let total = z[(0, 1)] + z[(0, 2)] + z[(1, 2)];
        assert!((total - 4.5).abs() < 1e-4, "{total}");
    }
}
