//! Unit-vector representations of a graph and their matrix encodings.
//!
//! An [`Embedding`] places one vector per vertex. Its Gram matrix
//! `X = [<v_i, v_j>]` and the shifted matrix `Z = 1 - X` are the variables of
//! the matrix programs. For unit vectors `||v_i - v_j||^2 = 2 z_ij`, so every
//! quantity can be evaluated in either form:
//!
//! - objective: `2^-p * sum_E ||v_i - v_j||^p  =  2^(-p/2) * sum_E z_ij^(p/2)`
//! - spread: `sum_{i<j} ||v_i - v_j||^2 >= 4c(1-c)n^2`, i.e. `sum_{i<j} z_ij >= 2c(1-c)n^2`
//! - triangle: `||v_i - v_j||^p + ||v_j - v_k||^p >= ||v_i - v_k||^p`

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Cut, Graph};

/// Up to this many vertices the triangle check enumerates every triple.
pub const TRIANGLE_ENUMERATION_CAP: usize = 64;
const TRIANGLE_SAMPLES: usize = 200_000;
const TRIANGLE_SAMPLE_SEED: u64 = 0x5EED_7A1A;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub unit: f64,
    pub psd: f64,
    pub triangle: f64,
    pub spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { unit: 1e-8, psd: 1e-7, triangle: 1e-8, spread: 1e-8 }
    }
}

impl Tolerances {
    /// Every tolerance set to `tol`.
    pub fn uniform(tol: f64) -> Self {
        Tolerances { unit: tol, psd: tol, triangle: tol, spread: tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    p: f64,
    c: f64,
}

impl RelaxationParams {
    pub fn new(p: f64, c: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!("exponent p = {p} not in (0, 2]")));
        }
        if !(c > 0.0 && c <= 0.5) {
            return Err(Error::InvalidParameter(format!("balance c = {c} not in (0, 1/2]")));
        }
        Ok(RelaxationParams { p, c })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Right-hand side of the spread constraint in vector form, `4c(1-c)n^2`.
pub fn spread_bound(n: usize, c: f64) -> f64 {
    4.0 * c * (1.0 - c) * (n * n) as f64
}

/// Right-hand side of the spread constraint in Z form, `2c(1-c)n^2`.
pub fn z_spread_bound(n: usize, c: f64) -> f64 {
    0.5 * spread_bound(n, c)
}

/// One vector per vertex, stored as the rows of an `n x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    vectors: DMatrix<f64>,
}

impl Embedding {
    /// Builds an embedding and checks every vector has unit norm within `tol_unit`.
    pub fn new(vectors: Vec<Vec<f64>>, tol_unit: f64) -> Result<Self> {
        let e = Embedding::from_rows(vectors)?;
        if let Some(i) = (0..e.n()).find(|&i| (e.vector_norm(i) - 1.0).abs() > tol_unit) {
            return Err(Error::Domain(format!(
                "vector {i} has norm {}, not 1 within {tol_unit:e}",
                e.vector_norm(i)
            )));
        }
        Ok(e)
    }

    /// Builds an embedding without the unit-norm check; used to evaluate
    /// constraint residuals of arbitrary vectors.
    pub fn from_rows(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = vectors.len();
        if n == 0 {
            return Err(Error::InvalidParameter("embedding needs at least one vector".into()));
        }
        let d = vectors[0].len();
        if d == 0 || d > n {
            return Err(Error::InvalidParameter(format!("dimension {d} not in [1, n = {n}]")));
        }
        if vectors.iter().any(|v| v.len() != d) {
            return Err(Error::InvalidParameter("vectors have differing dimensions".into()));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(Embedding { vectors: DMatrix::from_fn(n, d, |i, k| vectors[i][k]) })
    }

    pub(crate) fn from_matrix(vectors: DMatrix<f64>) -> Self {
        Embedding { vectors }
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn d(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.vector(i)).collect()
    }

    pub fn vector_norm(&self, i: usize) -> f64 {
        self.vectors.row(i).norm()
    }

    /// Euclidean distance between vectors `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.squared_distance(i, j).sqrt()
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        (0..self.d()).map(|k| (self.vectors[(i, k)] - self.vectors[(j, k)]).powi(2)).sum()
    }

    /// `||v_i - v_j||^p`, computed so that antipodal unit vectors give exactly `2^p`.
    pub fn distance_pow(&self, i: usize, j: usize, p: f64) -> f64 {
        pow_distance(self.distance(i, j), p)
    }

    pub fn projections(&self, direction: &[f64]) -> Vec<f64> {
        assert_eq!(direction.len(), self.d(), "direction has the wrong dimension");
        (0..self.n())
            .map(|i| (0..self.d()).map(|k| self.vectors[(i, k)] * direction[k]).sum())
            .collect()
    }
}

/// `dist^p` via `2^p * (dist/2)^p` so `dist == 2` maps to exactly `2^p`.
fn pow_distance(dist: f64, p: f64) -> f64 {
    if p == 2.0 {
        dist * dist
    } else if p == 1.0 {
        dist
    } else {
        2f64.powf(p) * (dist / 2.0).powf(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingDoc {
    pub n: usize,
    pub d: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl Serialize for Embedding {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EmbeddingDoc { n: self.n(), d: self.d(), vectors: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = EmbeddingDoc::deserialize(de)?;
        if doc.vectors.len() != doc.n || doc.vectors.iter().any(|v| v.len() != doc.d) {
            return Err(serde::de::Error::custom("`n`/`d` do not match `vectors`"));
        }
        Embedding::from_rows(doc.vectors).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub n: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl MatrixDoc {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixDoc {
            n: m.nrows(),
            matrix: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
    }

    fn into_matrix(self) -> std::result::Result<DMatrix<f64>, String> {
        if self.matrix.len() != self.n || self.matrix.iter().any(|r| r.len() != self.n) {
            return Err(format!("matrix is not {0} x {0}", self.n));
        }
        Ok(DMatrix::from_fn(self.n, self.n, |i, j| self.matrix[i][j]))
    }
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidParameter("matrix must be square and non-empty".into()));
    }
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > tol || !m[(i, j)].is_finite() {
                return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Symmetric matrix of pairwise inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct GramForm {
    x: DMatrix<f64>,
}

impl GramForm {
    /// Validates symmetry, unit diagonal (within `tol`) and `min eig >= -tol_psd`.
    pub fn new(x: DMatrix<f64>, tol: f64, tol_psd: f64) -> Result<Self> {
        check_symmetric(&x, tol)?;
        if let Some(i) = (0..x.nrows()).find(|&i| (x[(i, i)] - 1.0).abs() > tol) {
            return Err(Error::Domain(format!("diagonal entry {i} is {}, not 1", x[(i, i)])));
        }
        let min_eig = min_eigenvalue(&x);
        if min_eig < -tol_psd {
            return Err(Error::NotPsd { min_eigenvalue: min_eig });
        }
        Ok(GramForm { x })
    }

    pub(crate) fn from_matrix_unchecked(x: DMatrix<f64>) -> Self {
        GramForm { x }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[(i, j)]
    }
}

impl Serialize for GramForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixDoc::from_matrix(&self.x).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GramForm {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let m = MatrixDoc::deserialize(de)?.into_matrix().map_err(serde::de::Error::custom)?;
        let tol = Tolerances::default();
        GramForm::new(m, 1e-6, tol.psd).map_err(serde::de::Error::custom)
    }
}

/// `Z = 1 - X`; `z_ij = ||v_i - v_j||^2 / 2` for unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ZForm {
    z: DMatrix<f64>,
}

impl ZForm {
    /// Validates `z_ii = 0`, symmetry, `0 <= z_ij <= 2` and `1 - Z` PSD, all within tolerance.
    pub fn new(z: DMatrix<f64>, tol: f64, tol_psd: f64) -> Result<Self> {
        check_symmetric(&z, tol)?;
        let n = z.nrows();
        for i in 0..n {
            if z[(i, i)].abs() > tol {
                return Err(Error::Domain(format!("diagonal entry {i} of Z is nonzero")));
            }
            for j in 0..n {
                let v = z[(i, j)];
                if v < -tol || v > 2.0 + tol {
                    return Err(Error::Domain(format!("z[{i}][{j}] = {v} outside [0, 2]")));
                }
            }
        }
        let x = z.map(|v| 1.0 - v);
        let min_eig = min_eigenvalue(&x);
        if min_eig < -tol_psd {
            return Err(Error::NotPsd { min_eigenvalue: min_eig });
        }
        let mut z = z;
        z.fill_diagonal(0.0);
        Ok(ZForm { z })
    }

    pub(crate) fn from_matrix_unchecked(z: DMatrix<f64>) -> Self {
        ZForm { z }
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.z[(i, j)]
    }

    /// `sum_{i<j} z_ij`.
    pub fn spread(&self) -> f64 {
        let n = self.n();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.z[(i, j)]).sum()
    }
}

impl Serialize for ZForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixDoc::from_matrix(&self.z).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ZForm {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let m = MatrixDoc::deserialize(de)?.into_matrix().map_err(serde::de::Error::custom)?;
        ZForm::new(m, 1e-6, Tolerances::default().psd).map_err(serde::de::Error::custom)
    }
}

/// Maps `S` to `+1` and its complement to `-1` in one dimension.
pub fn cut_to_embedding(g: &Graph, s: &Cut) -> Embedding {
    assert_eq!(g.n(), s.n(), "cut and graph disagree on n");
    let ind = s.indicator();
    Embedding::from_matrix(DMatrix::from_fn(g.n(), 1, |i, _| if ind[i] { 1.0 } else { -1.0 }))
}

/// `2^-p * sum over edges of ||v_i - v_j||^p`.
pub fn objective(g: &Graph, e: &Embedding, p: f64) -> f64 {
    assert_eq!(g.n(), e.n(), "embedding and graph disagree on n");
    g.edges().iter().map(|&(i, j)| (e.distance(i, j) / 2.0).powf(p)).sum()
}

/// `sum_{i<j} ||v_i - v_j||^2` over all pairs.
pub fn spread(e: &Embedding) -> f64 {
    let n = e.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += e.squared_distance(i, j);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `max_i | ||v_i|| - 1 |`.
    pub max_unit_violation: f64,
    /// `max(0, max_{ijk} ||v_i-v_k||^p - ||v_i-v_j||^p - ||v_j-v_k||^p)`.
    pub max_triangle_violation: f64,
    /// `spread(e) - 4c(1-c)n^2`; negative means violated.
    pub spread_slack: f64,
    pub feasible: bool,
}

/// Evaluates the three constraint families of the relaxation at exponent `p`.
pub fn check_feasibility(e: &Embedding, params: RelaxationParams, tol: Tolerances) -> FeasibilityReport {
    let n = e.n();
    let max_unit_violation =
        (0..n).map(|i| (e.vector_norm(i) - 1.0).abs()).fold(0.0, f64::max);

    let mut pow = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = e.distance_pow(i, j, params.p);
            pow[(i, j)] = v;
            pow[(j, i)] = v;
        }
    }
    let max_triangle_violation = max_triangle_violation(&pow);
    let spread_slack = spread(e) - spread_bound(n, params.c);
    let feasible = max_unit_violation <= tol.unit
        && max_triangle_violation <= tol.triangle
        && spread_slack >= -tol.spread;
    FeasibilityReport { max_unit_violation, max_triangle_violation, spread_slack, feasible }
}

/// Largest `d_ik - d_ij - d_jk` over triples of a symmetric distance-like
/// matrix (clamped at zero). Exhaustive up to [`TRIANGLE_ENUMERATION_CAP`]
/// vertices, seeded sampling beyond.
pub(crate) fn max_triangle_violation(d: &DMatrix<f64>) -> f64 {
    let n = d.nrows();
    let mut worst = 0.0f64;
    if n <= TRIANGLE_ENUMERATION_CAP {
        for i in 0..n {
            for k in i + 1..n {
                let dik = d[(i, k)];
                for j in 0..n {
                    worst = worst.max(dik - d[(i, j)] - d[(j, k)]);
                }
            }
        }
    } else {
        use rand::Rng as _;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(TRIANGLE_SAMPLE_SEED);
        for _ in 0..TRIANGLE_SAMPLES {
            let (i, j, k) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
            worst = worst.max(d[(i, k)] - d[(i, j)] - d[(j, k)]);
        }
    }
    worst
}

pub fn gram_from_embedding(e: &Embedding) -> GramForm {
    let v = e.matrix();
    GramForm { x: v * v.transpose() }
}

/// Factors a Gram matrix back into vectors. Eigenvalues in `[-tol, 0)` are
/// clipped, lower ones are rejected; the dimension is the number of
/// eigenvalues above `tol`. Rows are renormalised to unit length.
pub fn embedding_from_gram(x: &GramForm, tol: f64) -> Result<Embedding> {
    let n = x.n();
    let eig = SymmetricEigen::new(x.matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let min_eig = eig.eigenvalues[order[n - 1]];
    if min_eig < -tol {
        return Err(Error::NotPsd { min_eigenvalue: min_eig });
    }
    let kept: Vec<usize> = order.iter().copied().filter(|&k| eig.eigenvalues[k] > tol).collect();
    let kept = if kept.is_empty() { vec![order[0]] } else { kept };
    let mut v = DMatrix::from_fn(n, kept.len(), |i, c| {
        let k = kept[c];
        eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt()
    });
    for i in 0..n {
        let norm = v.row(i).norm();
        if norm > 0.0 {
            v.row_mut(i).scale_mut(1.0 / norm);
        } else {
            v[(i, 0)] = 1.0;
        }
    }
    Ok(Embedding::from_matrix(v))
}

pub fn z_from_gram(x: &GramForm) -> ZForm {
    let mut z = x.matrix().map(|v| 1.0 - v);
    z.fill_diagonal(0.0);
    ZForm { z }
}

pub fn gram_from_z(z: &ZForm) -> GramForm {
    let mut x = z.matrix().map(|v| 1.0 - v);
    x.fill_diagonal(1.0);
    GramForm { x }
}

/// `2^(-p/2) * sum over edges of z_ij^(p/2)`. Entries below `-tol` are a
/// domain error; smaller negative noise is treated as zero.
pub fn objective_z(g: &Graph, z: &ZForm, p: f64, tol: f64) -> Result<f64> {
    assert_eq!(g.n(), z.n(), "Z and graph disagree on n");
    let mut total = 0.0;
    for &(i, j) in g.edges() {
        let v = z.get(i, j);
        if v < -tol {
            return Err(Error::Domain(format!("z[{i}][{j}] = {v} is negative")));
        }
        total += z_term(v, p);
    }
    Ok(total)
}

/// `(z/2)^(p/2)`, the per-edge objective term.
pub(crate) fn z_term(z: f64, p: f64) -> f64 {
    let half = z.max(0.0) / 2.0;
    if p == 2.0 {
        half
    } else {
        half.powf(p / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::cut_size;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand_distr::StandardNormal;

    fn c4() -> Graph {
        Graph::cycle(4).unwrap()
    }

    fn random_unit_vectors(n: usize, d: usize, rng: &mut impl rand::Rng) -> Embedding {
        let rows = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();
        Embedding::new(rows, 1e-12).unwrap()
    }

    #[test]
    fn cut_embedding_examples() {
        let g = c4();
        let e = cut_to_embedding(&g, &Cut::new(4, [0, 1]).unwrap());
        assert_eq!(e.rows(), vec![vec![1.0], vec![1.0], vec![-1.0], vec![-1.0]]);
        let e = cut_to_embedding(&g, &Cut::new(4, 0..4).unwrap());
        assert!(e.rows().iter().all(|r| r == &[1.0]));
        let p3 = Graph::path(3).unwrap();
        let e = cut_to_embedding(&p3, &Cut::new(3, [1]).unwrap());
        assert_eq!(e.rows(), vec![vec![-1.0], vec![1.0], vec![-1.0]]);
    }

    #[test]
    fn objective_examples() {
        let g = c4();
        let e = cut_to_embedding(&g, &Cut::new(4, [0, 1]).unwrap());
        for p in [0.3, 0.5, 1.0, 1.5, 2.0] {
            assert_eq!(objective(&g, &e, p), 2.0);
        }
        let edge = Graph::path(2).unwrap();
        let anti = Embedding::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 1e-12).unwrap();
        assert_eq!(objective(&edge, &anti, 1.0), 1.0);
        let same = Embedding::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]], 1e-12).unwrap();
        for p in [0.5, 1.0, 2.0] {
            assert_eq!(objective(&edge, &same, p), 0.0);
        }
    }

    #[test]
    fn spread_examples() {
        let e = cut_to_embedding(&c4(), &Cut::new(4, [0, 1]).unwrap());
        assert_eq!(spread(&e), 16.0);
        let same = Embedding::new(vec![vec![1.0]; 3], 1e-12).unwrap();
        assert_eq!(spread(&same), 0.0);
        let anti = Embedding::new(vec![vec![1.0], vec![-1.0]], 1e-12).unwrap();
        assert_eq!(spread(&anti), 4.0);
    }

    #[test]
    fn feasibility_examples() {
        let g = c4();
        let params = RelaxationParams::new(1.5, 0.25).unwrap();
        let e = cut_to_embedding(&g, &Cut::new(4, [0, 1]).unwrap());
        let r = check_feasibility(&e, params, Tolerances::default());
        assert!(r.feasible, "{r:?}");
        assert_eq!(r.spread_slack, 16.0 - 12.0);

        let mut rng = rng_from_seed(1);
        let e = random_unit_vectors(6, 4, &mut rng);
        let r = check_feasibility(&e, RelaxationParams::new(1.0, 0.25).unwrap(), Tolerances::default());
        assert!(r.max_triangle_violation <= 1e-12);

        let half = Embedding::from_rows(vec![vec![0.5], vec![-0.5], vec![0.5], vec![-0.5]]).unwrap();
        let r = check_feasibility(&half, params, Tolerances::default());
        assert_eq!(r.max_unit_violation, 0.5);
        assert!(!r.feasible);
    }

    #[test]
    fn embedding_rejects_non_unit_and_bad_shapes() {
        assert!(Embedding::new(vec![vec![0.5]], 1e-8).is_err());
        assert!(Embedding::from_rows(vec![vec![1.0, 0.0]]).is_err()); // d > n
        assert!(Embedding::from_rows(vec![vec![1.0], vec![1.0, 0.0]]).is_err());
        assert!(Embedding::from_rows(vec![]).is_err());
    }

    #[test]
    fn gram_examples() {
        let e = cut_to_embedding(&c4(), &Cut::new(4, [0, 1]).unwrap());
        let x = gram_from_embedding(&e);
        assert_eq!(x.get(0, 1), 1.0);
        assert_eq!(x.get(2, 3), 1.0);
        assert_eq!(x.get(0, 2), -1.0);
        assert_eq!(x.get(1, 3), -1.0);

        let ortho = Embedding::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1e-12).unwrap();
        assert_eq!(gram_from_embedding(&ortho).matrix(), &DMatrix::identity(2, 2));
        let single = Embedding::new(vec![vec![1.0]], 1e-12).unwrap();
        assert_eq!(gram_from_embedding(&single).matrix(), &DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn embedding_from_gram_examples() {
        let id = GramForm::new(DMatrix::identity(3, 3), 1e-12, 1e-7).unwrap();
        let e = embedding_from_gram(&id, 1e-7).unwrap();
        assert_eq!(e.d(), 3);
        let back = gram_from_embedding(&e);
        assert!((back.matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);

        let ones = GramForm::new(DMatrix::from_element(4, 4, 1.0), 1e-12, 1e-7).unwrap();
        let e = embedding_from_gram(&ones, 1e-7).unwrap();
        assert_eq!(e.d(), 1);
        for i in 1..4 {
            assert!(e.distance(0, i) < 1e-12);
        }
    }

    #[test]
    fn embedding_from_gram_rejects_indefinite() {
        // Three pairwise-antipodal unit vectors cannot exist.
        let x = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -1.0 });
        assert!(matches!(GramForm::new(x.clone(), 1e-12, 1e-7), Err(Error::NotPsd { .. })));
        let g = GramForm::from_matrix_unchecked(x);
        assert!(matches!(embedding_from_gram(&g, 1e-7), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn z_form_examples() {
        let id = GramForm::new(DMatrix::identity(3, 3), 1e-12, 1e-7).unwrap();
        let z = z_from_gram(&id);
        assert_eq!(z.matrix(), &DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 }));
        assert_eq!(gram_from_z(&z), id);

        let e = cut_to_embedding(&c4(), &Cut::new(4, [0, 1]).unwrap());
        let z = z_from_gram(&gram_from_embedding(&e));
        assert_eq!(z.get(0, 1), 0.0);
        assert_eq!(z.get(0, 2), 2.0);
        assert_eq!(objective_z(&c4(), &z, 1.0, 1e-9).unwrap(), 2.0);
        for p in [0.5, 1.5, 2.0] {
            assert_eq!(objective_z(&c4(), &z, p, 1e-9).unwrap(), 2.0);
        }
    }

    #[test]
    fn objective_z_edge_cases() {
        let g = Graph::path(2).unwrap();
        let zero = ZForm::new(DMatrix::zeros(2, 2), 1e-12, 1e-7).unwrap();
        assert_eq!(objective_z(&g, &zero, 1.0, 1e-9).unwrap(), 0.0);
        let anti = ZForm::new(DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]), 1e-12, 1e-7).unwrap();
        assert!((objective_z(&g, &anti, 1.0, 1e-9).unwrap() - 1.0).abs() < 1e-15);
        let neg = ZForm::from_matrix_unchecked(DMatrix::from_row_slice(2, 2, &[0.0, -0.1, -0.1, 0.0]));
        assert!(matches!(objective_z(&g, &neg, 1.0, 1e-9), Err(Error::Domain(_))));
    }

    #[test]
    fn json_documents_roundtrip() {
        let e = cut_to_embedding(&c4(), &Cut::new(4, [0, 1]).unwrap());
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(text, r#"{"n":4,"d":1,"vectors":[[1.0],[1.0],[-1.0],[-1.0]]}"#);
        let back: Embedding = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
        let x = gram_from_embedding(&e);
        let text = serde_json::to_string(&x).unwrap();
        assert!(text.starts_with(r#"{"n":4,"matrix":[[1.0,1.0,-1.0,-1.0]"#), "{text}");
        assert_eq!(serde_json::from_str::<GramForm>(&text).unwrap(), x);
        assert!(serde_json::from_str::<Embedding>(r#"{"n":2,"d":1,"vectors":[[1.0]]}"#).is_err());
    }

    #[test]
    fn triangle_check_depends_on_exponent() {
        // Euclidean distances satisfy the triangle inequality, hence so does
        // any power p <= 1 of them: no triple is feasible at p = 2 yet
        // infeasible at p = 0.5. The reverse separation exists and is found
        // by random search.
        let strict = Tolerances::default();
        let params = |p| RelaxationParams::new(p, 0.01).unwrap();
        let mut rng = rng_from_seed(43);
        let mut separating = None;
        for _ in 0..20_000 {
            let e = random_unit_vectors(3, 3, &mut rng);
            let at2 = check_feasibility(&e, params(2.0), strict);
            let at05 = check_feasibility(&e, params(0.5), strict);
            assert!(at05.max_triangle_violation <= 1e-12);
            if at2.max_triangle_violation > 1e-3 {
                separating = Some(e);
                break;
            }
        }
        let e = separating.expect("a triple violating the squared-distance triangle inequality");
        assert!(check_feasibility(&e, params(2.0), strict).max_triangle_violation > 1e-3);
        assert!(check_feasibility(&e, params(0.5), strict).max_triangle_violation <= 1e-12);
    }

    proptest! {
        #[test]
        fn objective_forms_agree(seed in any::<u64>(), n in 2usize..9, d in 1usize..4, p in 0.1f64..2.0) {
            let mut rng = rng_from_seed(seed);
            let d = d.min(n);
            let e = random_unit_vectors(n, d, &mut rng);
            let g = Graph::gnp(n, 0.5, &mut rng).unwrap();
            let z = z_from_gram(&gram_from_embedding(&e));
            let a = objective(&g, &e, p);
            let b = objective_z(&g, &z, p, 1e-9).unwrap();
            prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
        }

        #[test]
        fn gram_roundtrip_preserves_inner_products(seed in any::<u64>(), n in 1usize..9, d in 1usize..9) {
            let mut rng = rng_from_seed(seed);
            let e = random_unit_vectors(n, d.min(n), &mut rng);
            let x = gram_from_embedding(&e);
            let back = gram_from_embedding(&embedding_from_gram(&x, 1e-7).unwrap());
            prop_assert!((back.matrix() - x.matrix()).amax() <= 1e-6);
        }

        #[test]
        fn balanced_cut_embeddings_are_feasible_and_exact(seed in any::<u64>(), n in 2usize..=10) {
            let mut rng = rng_from_seed(seed);
            let g = Graph::gnp(n, 0.5, &mut rng).unwrap();
            let c = 0.25;
            if let Ok(s) = crate::graph::random_balanced_cut(n, c, &mut rng) {
                let e = cut_to_embedding(&g, &s);
                for p in [0.5, 1.0, 1.5, 2.0] {
                    let r = check_feasibility(&e, RelaxationParams::new(p, c).unwrap(), Tolerances::default());
                    prop_assert!(r.feasible);
                    prop_assert_eq!(objective(&g, &e, p), cut_size(&g, &s) as f64);
                }
            }
        }

        #[test]
        fn z_gram_involution(seed in any::<u64>(), n in 1usize..8) {
            let mut rng = rng_from_seed(seed);
            let x = gram_from_embedding(&random_unit_vectors(n, n, &mut rng));
            let mut expected = x.matrix().clone();
            expected.fill_diagonal(1.0);
            // 1 - (1 - x) is exact for x in [0.5, 1] and within one rounding otherwise.
            prop_assert!((gram_from_z(&z_from_gram(&x)).matrix() - expected).amax() <= 2.0 * f64::EPSILON);
        }
    }
}
