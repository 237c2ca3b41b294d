//! Rounding: random-projection set finding, Δ-separation checks, region
//! growing from the separated sets, and the end-to-end pipeline.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::concave::{solve_concave, ConcaveOptions};
use crate::embedding::{embedding_from_gram, gram_from_z, Embedding};
use crate::graph::{cut_size, exact_balanced_separator, Cut, Graph, DEFAULT_BRUTE_FORCE_CAP};
use crate::rng::{derive_seed, derived_rng, Rng};
use crate::sdp::{solve_sdp, SdpOptions, SolveReport};
use crate::{Error, Result};

/// Eigenvalues below this are dropped when the relaxation's Gram matrix is
/// factored into vectors.
const FACTOR_TOL: f64 = 1e-6;

/// `b * (ln n)^(-(1 + p/2) / 3)`.
pub fn delta_target(n: usize, p: f64, b: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("delta_target needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("p and b must be positive, got p = {p}, b = {b}")));
    }
    Ok(b * (n as f64).ln().powf(-(1.0 + 0.5 * p) / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundingParams {
    /// Separation target, in `||.||^p` units.
    pub delta: f64,
    /// Projection margin.
    pub sigma: f64,
    /// Required size fraction of each returned set.
    pub c_prime: f64,
    pub b_const: f64,
    pub seed: u64,
}

impl RoundingParams {
    pub fn new(delta: f64, sigma: f64, c_prime: f64) -> Result<Self> {
        let p = RoundingParams { delta, sigma, c_prime, b_const: 1.0, seed: 0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.c_prime > 0.0 && self.c_prime < 0.5) {
            return Err(Error::InvalidParameter(format!("c' must lie in (0, 1/2), got {}", self.c_prime)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatedSets {
    pub s_side: Vec<usize>,
    pub t_side: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// A side of the median split had at most `2c'n` vertices.
    SmallProjection,
    /// A side fell below `c'n` after the close cross pairs were removed.
    SmallAfterDeletion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SetFindOutcome {
    Success { sets: SeparatedSets, deleted_pairs: usize },
    /// `sets` holds whatever was left when the run halted.
    Failure { reason: FailureReason, sets: SeparatedSets, deleted_pairs: usize },
}

impl SetFindOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, SetFindOutcome::Success { .. })
    }

    pub fn sets(&self) -> &SeparatedSets {
        match self {
            SetFindOutcome::Success { sets, .. } | SetFindOutcome::Failure { sets, .. } => sets,
        }
    }
}

/// Uniform random unit vector in `R^d` (normalised Gaussian).
pub fn random_unit_vector(d: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return u.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Set-find along a random direction drawn from `rng`.
pub fn modified_set_find(e: &Embedding, p: f64, params: &RoundingParams, rng: &mut Rng) -> Result<SetFindOutcome> {
    let u = random_unit_vector(e.d(), rng);
    modified_set_find_along(e, p, params, &u)
}

/// Set-find along a fixed direction `u`, which need not be normalised.
pub fn modified_set_find_along(e: &Embedding, p: f64, params: &RoundingParams, u: &[f64]) -> Result<SetFindOutcome> {
    params.validate()?;
    if u.len() != e.d() {
        return Err(Error::InvalidParameter(format!("direction has dimension {}, embedding has {}", u.len(), e.d())));
    }
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParameter("direction must be a nonzero finite vector".into()));
    }
    let u: Vec<f64> = u.iter().map(|x| x / norm).collect();
    let n = e.n();
    let proj = e.projections(&u);
    let m = median(&proj);
    let margin = params.sigma / (2.0 * (e.d() as f64).sqrt());
    let mut s: Vec<usize> = (0..n).filter(|&i| proj[i] >= m + margin).collect();
    let mut t: Vec<usize> = (0..n).filter(|&i| proj[i] <= m - margin).collect();

    let halt = 2.0 * params.c_prime * n as f64;
    if s.len() as f64 <= halt || t.len() as f64 <= halt {
        return Ok(SetFindOutcome::Failure {
            reason: FailureReason::SmallProjection,
            sets: SeparatedSets { s_side: s, t_side: t },
            deleted_pairs: 0,
        });
    }

    // Greedy matching: each close cross pair found in scan order removes both
    // endpoints.
    let mut removed = vec![false; n];
    let mut deleted_pairs = 0;
    for &a in &s {
        if removed[a] {
            continue;
        }
        if let Some(&b) = t.iter().find(|&&b| !removed[b] && e.distance_pow(a, b, p) <= params.delta) {
            removed[a] = true;
            removed[b] = true;
            deleted_pairs += 1;
        }
    }
    s.retain(|&i| !removed[i]);
    t.retain(|&i| !removed[i]);

    let sets = SeparatedSets { s_side: s, t_side: t };
    let floor = params.c_prime * n as f64;
    if (sets.s_side.len() as f64) < floor || (sets.t_side.len() as f64) < floor {
        return Ok(SetFindOutcome::Failure { reason: FailureReason::SmallAfterDeletion, sets, deleted_pairs });
    }
    Ok(SetFindOutcome::Success { sets, deleted_pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationCheck {
    pub separated: bool,
    /// Closest cross pair `(s, t, ||v_s - v_t||^p)`; `None` when a side is empty.
    pub worst: Option<(usize, usize, f64)>,
}

pub fn check_separated(e: &Embedding, s_side: &[usize], t_side: &[usize], p: f64, delta: f64) -> SeparationCheck {
    let mut worst: Option<(usize, usize, f64)> = None;
    for &a in s_side {
        for &b in t_side {
            let d = e.distance_pow(a, b, p);
            if worst.is_none_or(|w| d < w.2) {
                worst = Some((a, b, d));
            }
        }
    }
    SeparationCheck { separated: worst.is_none_or(|w| w.2 >= delta), worst }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed for a min-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Shortest-path distance from `sources` with edge weights `||v_i - v_j||^p`;
/// unreachable vertices get `+inf`.
pub fn distances_from(g: &Graph, e: &Embedding, p: f64, sources: &[usize]) -> Vec<f64> {
    let n = g.n();
    let adj = g.neighbors();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
    }
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &w in &adj[v] {
            let nd = d + e.distance_pow(v, w, p);
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

/// `V_r = {v : dist(v) <= r}` for distances from the S side.
pub fn cut_at_radius(dist: &[f64], r: f64) -> Cut {
    Cut::from_indicator(&dist.iter().map(|&d| d <= r).collect::<Vec<_>>())
}

fn check_sides(n: usize, sep: &SeparatedSets) -> Result<()> {
    if sep.s_side.is_empty() || sep.t_side.is_empty() {
        return Err(Error::InvalidParameter("both separated sets must be nonempty".into()));
    }
    if sep.s_side.iter().chain(&sep.t_side).any(|&v| v >= n) {
        return Err(Error::InvalidParameter("separated sets name a vertex outside the graph".into()));
    }
    if sep.s_side.iter().any(|v| sep.t_side.contains(v)) {
        return Err(Error::InvalidParameter("separated sets are not disjoint".into()));
    }
    Ok(())
}

/// Draws the radius and returns `(V_r, r)`.
///
/// `r` is uniform on `[0, min(delta, d_T))` with `d_T` the distance to the
/// nearest T vertex. With exact triangle inequalities `d_T >= delta`; the
/// clamp only absorbs the solver's feasibility slack so T stays excluded.
pub fn produce_cut_with_radius(
    g: &Graph,
    e: &Embedding,
    p: f64,
    sep: &SeparatedSets,
    delta: f64,
    rng: &mut Rng,
) -> Result<(Cut, f64)> {
    if g.n() != e.n() {
        return Err(Error::InvalidParameter("graph and embedding disagree on n".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    check_sides(g.n(), sep)?;
    let dist = distances_from(g, e, p, &sep.s_side);
    let d_t = sep.t_side.iter().map(|&v| dist[v]).fold(f64::INFINITY, f64::min);
    let r = rng.random::<f64>() * delta.min(d_t);
    Ok((cut_at_radius(&dist, r), r))
}

pub fn produce_cut(g: &Graph, e: &Embedding, p: f64, sep: &SeparatedSets, delta: f64, rng: &mut Rng) -> Result<Cut> {
    produce_cut_with_radius(g, e, p, sep, delta, rng).map(|(cut, _)| cut)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum DeltaChoice {
    /// `delta_target(n, p, b_const)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub delta: DeltaChoice,
    pub sigma: f64,
    /// `None` means `c / 4`.
    pub c_prime: Option<f64>,
    pub b_const: f64,
    pub retries: usize,
    pub seed: u64,
    pub sdp: SdpOptions,
    pub concave: ConcaveOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            delta: DeltaChoice::Auto,
            sigma: 1.0,
            c_prime: None,
            b_const: 1.0,
            retries: 64,
            seed: 0,
            sdp: SdpOptions::default(),
            concave: ConcaveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub n: usize,
    pub c: f64,
    pub p: f64,
    pub c_prime: f64,
    pub delta: f64,
    pub sigma: f64,
    pub seed: u64,
    pub dimension: usize,
    pub relaxation_value: f64,
    /// Absent when the embedding was supplied rather than solved for.
    pub solver: Option<SolveReport>,
    /// Optimal c-balanced cut size when `n` is within the brute-force cap.
    pub exact_value: Option<usize>,
    pub success: bool,
    /// Set-find attempts made, including the successful one.
    pub attempts: usize,
    pub sets: Option<SeparatedSets>,
    pub separation: Option<SeparationCheck>,
    pub radius: Option<f64>,
    pub cut_members: Option<Vec<usize>>,
    pub cut_size: Option<usize>,
    /// Smaller side over `n`.
    pub balance: Option<f64>,
    /// `cut_size / max(relaxation_value, exact_value)`.
    pub ratio: Option<f64>,
    pub s_contained: Option<bool>,
    pub t_excluded: Option<bool>,
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 2], got {p}")));
    }
    Ok(())
}

/// Relaxation, set-find with retries, and region growing.
pub fn pipeline(g: &Graph, c: f64, p: f64, opts: &PipelineOptions) -> Result<PipelineReport> {
    check_exponent(p)?;
    let solver_seed = derive_seed(opts.seed, "solver", 0);
    let (gram, solver) = if p == 2.0 {
        solve_sdp(g, c, &SdpOptions { seed: solver_seed, ..opts.sdp })?
    } else {
        let (z, report) = solve_concave(g, c, p, &ConcaveOptions { seed: solver_seed, ..opts.concave })?;
        (gram_from_z(&z), report)
    };
    let e = embedding_from_gram(&gram, FACTOR_TOL)?;
    let mut report = round_embedding(g, &e, c, p, solver.value, opts)?;
    report.solver = Some(solver);
    Ok(report)
}

/// Set-find with retries and region growing on a given embedding.
/// `relaxation_value` enters the ratio's denominator.
pub fn round_embedding(
    g: &Graph,
    e: &Embedding,
    c: f64,
    p: f64,
    relaxation_value: f64,
    opts: &PipelineOptions,
) -> Result<PipelineReport> {
    check_exponent(p)?;
    if opts.retries == 0 {
        return Err(Error::InvalidParameter("retries must be at least 1".into()));
    }
    let n = g.n();
    if e.n() != n {
        return Err(Error::InvalidParameter(format!("embedding has {} vectors, graph has {n} vertices", e.n())));
    }
    let c_prime = opts.c_prime.unwrap_or(c / 4.0);
    let delta = match opts.delta {
        DeltaChoice::Auto => delta_target(n, p, opts.b_const)?,
        DeltaChoice::Fixed(d) => d,
    };
    let params = RoundingParams { delta, sigma: opts.sigma, c_prime, b_const: opts.b_const, seed: opts.seed };
    params.validate()?;
    let exact_value = if n <= DEFAULT_BRUTE_FORCE_CAP { Some(exact_balanced_separator(g, c)?.1) } else { None };

    let mut report = PipelineReport {
        n,
        c,
        p,
        c_prime,
        delta,
        sigma: opts.sigma,
        seed: opts.seed,
        dimension: e.d(),
        relaxation_value,
        solver: None,
        exact_value,
        success: false,
        attempts: 0,
        sets: None,
        separation: None,
        radius: None,
        cut_members: None,
        cut_size: None,
        balance: None,
        ratio: None,
        s_contained: None,
        t_excluded: None,
    };

    // Attempt k uses its own derived streams, so the first success is the
    // same whether attempts run in order or concurrently.
    for attempt in 0..opts.retries {
        report.attempts = attempt + 1;
        let mut rng = derived_rng(opts.seed, "set-find", attempt as u64);
        let SetFindOutcome::Success { sets, .. } = modified_set_find(e, p, &params, &mut rng)? else {
            continue;
        };
        let mut rng = derived_rng(opts.seed, "radius", attempt as u64);
        let (cut, r) = produce_cut_with_radius(g, e, p, &sets, delta, &mut rng)?;
        let size = cut_size(g, &cut);
        let denom = relaxation_value.max(exact_value.map_or(0.0, |v| v as f64));
        report.success = true;
        report.separation = Some(check_separated(e, &sets.s_side, &sets.t_side, p, delta));
        report.s_contained = Some(sets.s_side.iter().all(|&v| cut.contains(v)));
        report.t_excluded = Some(sets.t_side.iter().all(|&v| !cut.contains(v)));
        report.sets = Some(sets);
        report.radius = Some(r);
        report.cut_size = Some(size);
        report.balance = Some(cut.len().min(n - cut.len()) as f64 / n as f64);
        report.ratio = Some(if denom > 0.0 { size as f64 / denom } else if size == 0 { 1.0 } else { f64::INFINITY });
        report.cut_members = Some(cut.members().to_vec());
        break;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTestReport {
    pub d: usize,
    pub l: f64,
    pub x: f64,
    pub samples: usize,
    /// Fraction with `|<v,u>| <= x l / sqrt(d)`.
    pub empirical_low: f64,
    /// Fraction with `|<v,u>| >= x l / sqrt(d)`.
    pub empirical_high: f64,
    /// `3x`.
    pub bound_low: f64,
    /// `exp(-x^2 / 4)`.
    pub bound_high: f64,
    /// The lemma covers the low bound for `x < 1`.
    pub low_applicable: bool,
    /// The lemma covers the high bound for `0 < x <= sqrt(d) / 4`.
    pub high_applicable: bool,
}

impl ProjectionTestReport {
    /// Both estimates lie within `k` binomial standard deviations of their bounds.
    pub fn within_bounds(&self, k: f64) -> bool {
        within_binomial_slack(self.empirical_low, self.bound_low, self.samples, k)
            && within_binomial_slack(self.empirical_high, self.bound_high, self.samples, k)
    }
}

/// `empirical <= bound + k * sqrt(b (1 - b) / samples)` with `b` the bound
/// clamped to `[0, 1]`.
pub fn within_binomial_slack(empirical: f64, bound: f64, samples: usize, k: f64) -> bool {
    let b = bound.clamp(0.0, 1.0);
    empirical <= bound + k * (b * (1.0 - b) / samples as f64).sqrt()
}

/// Monte Carlo estimate of how `<v, u>` concentrates for a fixed `v` of
/// length `l` and a uniform unit vector `u` in `R^d`.
pub fn gaussian_projection_test(d: usize, l: f64, x: f64, samples: usize, seed: u64) -> Result<ProjectionTestReport> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be positive".into()));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!("l must be positive, got {l}")));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("x must be nonnegative, got {x}")));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let mut rng = derived_rng(seed, "projection", d as u64);
    let threshold = x * l / (d as f64).sqrt();
    let (mut low, mut high) = (0usize, 0usize);
    for _ in 0..samples {
        // v = l e_1, so <v, u> = l u_1.
        let u = random_unit_vector(d, &mut rng);
        let dot = (l * u[0]).abs();
        // The low event needs x > 0: the interval is degenerate otherwise.
        if x > 0.0 && dot <= threshold {
            low += 1;
        }
        if dot >= threshold {
            high += 1;
        }
    }
    Ok(ProjectionTestReport {
        d,
        l,
        x,
        samples,
        empirical_low: low as f64 / samples as f64,
        empirical_high: high as f64 / samples as f64,
        bound_low: 3.0 * x,
        bound_high: (-x * x / 4.0).exp(),
        low_applicable: x < 1.0,
        high_applicable: x > 0.0 && x <= (d as f64).sqrt() / 4.0,
    })
}
