//! Triangle constraints `z_ij^(p/2) + z_jk^(p/2) >= z_ik^(p/2)` in Z form.
//!
//! With `q = 2/p` the constraint reads `f(z_ij, z_jk) >= z_ik` for
//! `f(x, y) = (x^(1/q) + y^(1/q))^q`, which is concave and positively
//! homogeneous for `q >= 1`. Any tangent plane of `f` therefore lies above
//! `f` and passes through the origin, so `a z_ij + b z_jk - z_ik >= 0` with
//! `(a, b) = grad f` at any positive point is a valid cut, and it separates
//! the point it was taken at. For `p = 2` the gradient is `(1, 1)` and the cut
//! is the constraint itself.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::engine::{LinearConstraint, Separator};

/// Gradient of `f` is evaluated no closer to the axes than this.
const CUT_FLOOR: f64 = 1e-9;

/// `(x^(1/q) + y^(1/q))^q` for `x, y >= 0`.
pub(crate) fn f_q(x: f64, y: f64, q: f64) -> f64 {
    let (x, y) = (x.max(0.0), y.max(0.0));
    if q == 1.0 {
        return x + y;
    }
    (x.powf(1.0 / q) + y.powf(1.0 / q)).powf(q)
}

/// Gradient of [`f_q`] at a strictly positive point.
pub(crate) fn grad_f_q(x: f64, y: f64, q: f64) -> (f64, f64) {
    if q == 1.0 {
        return (1.0, 1.0);
    }
    let r = (y / x).powf(1.0 / q);
    ((1.0 + r).powf(q - 1.0), (1.0 + 1.0 / r).powf(q - 1.0))
}

/// A violated triangle `(i, j, k)` with `j` the middle vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleViolation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub violation: f64,
}

/// Every triple with `i < k`, `j` distinct from both, whose Z-form violation
/// `z_ik - f(z_ij, z_jk)` exceeds `tol`, worst first.
pub(crate) fn violations(z: &DMatrix<f64>, p: f64, tol: f64) -> Vec<TriangleViolation> {
    let n = z.nrows();
    let q = 2.0 / p;
    let mut out = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            let zik = z[(i, k)];
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let v = zik - f_q(z[(i, j)], z[(j, k)], q);
                if v > tol {
                    out.push(TriangleViolation { i, j, k, violation: v });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        b.violation.total_cmp(&a.violation).then((a.i, a.j, a.k).cmp(&(b.i, b.j, b.k)))
    });
    out
}

pub(crate) fn max_violation(z: &DMatrix<f64>, p: f64) -> f64 {
    let n = z.nrows();
    let q = 2.0 / p;
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in i + 1..n {
            for j in 0..n {
                if j != i && j != k {
                    worst = worst.max(z[(i, k)] - f_q(z[(i, j)], z[(j, k)], q));
                }
            }
        }
    }
    worst
}

/// Lazy separator for the triangle family at exponent `p`.
pub(crate) struct TriangleSeparator {
    p: f64,
    seen: HashSet<(usize, usize, usize)>,
}

impl TriangleSeparator {
    pub(crate) fn new(p: f64) -> Self {
        TriangleSeparator { p, seen: HashSet::new() }
    }

    fn cut(&self, t: &TriangleViolation, z: &DMatrix<f64>) -> LinearConstraint {
        let q = 2.0 / self.p;
        let x = z[(t.i, t.j)].max(CUT_FLOOR);
        let y = z[(t.j, t.k)].max(CUT_FLOOR);
        let (a, b) = grad_f_q(x, y, q);
        LinearConstraint::new(vec![(t.i, t.j, a), (t.j, t.k, b), (t.i, t.k, -1.0)], 0.0).with_key((t.i, t.j, t.k))
    }
}

impl Separator for TriangleSeparator {
    fn separate(&mut self, z: &DMatrix<f64>, tol: f64, limit: usize) -> Vec<LinearConstraint> {
        let linear = self.p == 2.0;
        let mut cuts = Vec::new();
        for t in violations(z, self.p, tol) {
            if cuts.len() >= limit {
                break;
            }
            if linear && !self.seen.insert((t.i, t.j, t.k)) {
                continue;
            }
            cuts.push(self.cut(&t, z));
        }
        cuts
    }

    fn max_violation(&self, z: &DMatrix<f64>) -> f64 {
        max_violation(z, self.p)
    }
}
