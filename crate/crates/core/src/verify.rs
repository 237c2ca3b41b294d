//! Property suites run by the harness: concavity of the objective, convexity
//! of the feasible set, the Hessian identities, the projection lemma,
//! representation roundtrips and relaxation soundness against the exact
//! oracle.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concave::{check_concavity, feasible_point_from_cut, solve_concave, z_feasibility, ConcaveOptions};
use crate::embedding::{
    check_feasibility, cut_to_embedding, embedding_from_gram, gram_from_embedding, gram_from_z, min_eigenvalue,
    objective, objective_z, z_from_gram, z_spread_bound, Embedding, GramForm, RelaxationParams, Tolerances, ZForm,
};
use crate::graph::{cut_size, exact_balanced_separator, random_balanced_cut, Graph};
use crate::rng::{derived_rng, Rng};
use crate::rounding::{gaussian_projection_test, random_unit_vector};
use crate::sdp::{solve_sdp, SdpOptions};
use crate::{triangles, Error, Result};

/// Slack on the concavity inequality and on constraint checks of convex combinations.
pub const COMBINATION_SLACK: f64 = 1e-9;
/// Exponents at which concavity and convexity are sampled.
pub const CONCAVE_EXPONENTS: [f64; 3] = [0.5, 1.0, 1.5];
/// Exponent grid of the soundness and cut-exactness checks.
pub const EXPONENT_GRID: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const HESSIAN_QS: [f64; 3] = [4.0 / 3.0, 2.0, 4.0];
pub const PROJECTION_DIMS: [usize; 2] = [10, 100];
pub const PROJECTION_LOW_XS: [f64; 3] = [0.05, 0.1, 0.3];
pub const PROJECTION_HIGH_XS: [f64; 3] = [1.0, 2.0, 3.0];
pub const SOUNDNESS_TOL: f64 = 1e-5;
/// Balance parameter used by every suite.
pub const SUITE_C: f64 = 0.25;
/// Root seed of the fixed soundness corpus; independent of the run seed.
pub const CORPUS_SEED: u64 = 2024;

/// Generated points must satisfy the constraints this tightly before use.
const POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Concavity,
    Convexity,
    Hessian,
    Gaussian,
    Roundtrip,
    Soundness,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Concavity, Suite::Convexity, Suite::Hessian, Suite::Gaussian, Suite::Roundtrip, Suite::Soundness];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Concavity => "concavity",
            Suite::Convexity => "convexity",
            Suite::Hessian => "hessian",
            Suite::Gaussian => "gaussian",
            Suite::Roundtrip => "roundtrip",
            Suite::Soundness => "soundness",
        }
    }

    /// Names accepted by [`Suite::parse_selector`].
    pub fn selector_names() -> Vec<&'static str> {
        Suite::ALL.iter().map(|s| s.name()).chain(["all"]).collect()
    }

    /// `all` or a single suite name.
    pub fn parse_selector(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        s.parse().map(|suite| vec![suite])
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|suite| suite.name() == s).ok_or_else(|| {
            Error::InvalidParameter(format!("unknown suite '{s}'; expected one of {}", Suite::selector_names().join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Pairs per exponent for the concavity and convexity suites.
    pub samples: usize,
    pub hessian_samples: usize,
    pub projection_samples: usize,
    /// (graph, cut) pairs in the cut-exactness check.
    pub cut_pairs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, samples: 1000, hessian_samples: 100, projection_samples: 100_000, cut_pairs: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Worst observed quantity, in the check's own units.
    pub worst: f64,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, samples: usize, worst: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, samples, worst, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub wall_time_secs: f64,
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteResult> {
    let timer = std::time::Instant::now();
    let checks = match suite {
        Suite::Concavity => concavity_checks(opts)?,
        Suite::Convexity => convexity_checks(opts)?,
        Suite::Hessian => hessian_checks(opts)?,
        Suite::Gaussian => gaussian_checks(opts)?,
        Suite::Roundtrip => roundtrip_checks(opts)?,
        Suite::Soundness => soundness_checks()?,
    };
    Ok(SuiteResult {
        suite,
        passed: checks.iter().all(|c| c.passed),
        checks,
        wall_time_secs: timer.elapsed().as_secs_f64(),
    })
}

pub fn run_suites(suites: &[Suite], opts: &VerifyOptions) -> Result<Vec<SuiteResult>> {
    suites.iter().map(|&s| run_suite(s, opts)).collect()
}

fn cut_z(n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let s = random_balanced_cut(n, SUITE_C, rng).expect("suite sizes admit balanced cuts");
    DMatrix::from_fn(n, n, |i, j| if s.contains(i) != s.contains(j) { 2.0 } else { 0.0 })
}

fn vector_z(n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let d = rng.random_range(1..=3.min(n));
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_unit_vector(d, rng)).collect();
    let e = Embedding::from_rows(rows).expect("d <= n");
    z_from_gram(&gram_from_embedding(&e)).matrix().clone()
}

/// A random Z feasible at `p` (checked to [`POINT_TOL`]): a cut point, a
/// random unit-vector configuration, or a convex combination of two cut
/// points. Candidates failing the check are redrawn; cut points always pass.
pub fn random_feasible_z(n: usize, p: f64, rng: &mut Rng) -> DMatrix<f64> {
    for _ in 0..50 {
        let z = match rng.random_range(0..3) {
            0 => cut_z(n, rng),
            1 => vector_z(n, rng),
            _ => {
                let t: f64 = rng.random();
                cut_z(n, rng) * t + cut_z(n, rng) * (1.0 - t)
            }
        };
        if z_feasibility(&z, p, SUITE_C, POINT_TOL).feasible {
            return z;
        }
    }
    cut_z(n, rng)
}

fn concavity_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (k, &p) in CONCAVE_EXPONENTS.iter().enumerate() {
        let mut rng = derived_rng(opts.seed, "concavity-suite", k as u64);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..opts.samples {
            let n = rng.random_range(4..=10);
            let g = Graph::gnp(n, 0.5, &mut rng)?;
            let (z1, z2) = (random_feasible_z(n, p, &mut rng), random_feasible_z(n, p, &mut rng));
            let lambda: f64 = rng.random();
            let mix = &z1 * lambda + &z2 * (1.0 - lambda);
            let obj = |z: &DMatrix<f64>| objective_z(&g, &ZForm::from_matrix_unchecked(z.clone()), p, POINT_TOL);
            // Positive gap means the inequality is violated.
            let gap = lambda * obj(&z1)? + (1.0 - lambda) * obj(&z2)? - obj(&mix)?;
            worst = worst.max(gap);
        }
        checks.push(Check::new(
            format!("objective_concave_p{p}"),
            worst <= COMBINATION_SLACK,
            opts.samples,
            worst,
            "max of lambda f(Z1) + (1-lambda) f(Z2) - f(mix)",
        ));
    }
    Ok(checks)
}

fn convexity_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (k, &p) in CONCAVE_EXPONENTS.iter().enumerate() {
        let mut rng = derived_rng(opts.seed, "convexity-suite", k as u64);
        let (mut psd, mut tri, mut spread) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..opts.samples {
            let n = rng.random_range(4..=10);
            let (z1, z2) = (random_feasible_z(n, p, &mut rng), random_feasible_z(n, p, &mut rng));
            let lambda: f64 = rng.random();
            let mix = &z1 * lambda + &z2 * (1.0 - lambda);
            psd = psd.max(-min_eigenvalue(&mix.map(|v| 1.0 - v)));
            tri = tri.max(triangles::max_violation(&mix, p));
            let total: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| mix[(i, j)]).sum();
            spread = spread.max(z_spread_bound(n, SUITE_C) - total);
        }
        let s = opts.samples;
        checks.push(Check::new(format!("psd_p{p}"), psd <= COMBINATION_SLACK, s, psd, "max of -lambda_min(1 - mix)"));
        checks.push(Check::new(format!("triangle_p{p}"), tri <= COMBINATION_SLACK, s, tri, "max z-form triangle violation"));
        checks.push(Check::new(format!("spread_p{p}"), spread <= COMBINATION_SLACK, s, spread, "max spread shortfall"));
    }
    Ok(checks)
}

fn hessian_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (k, &q) in HESSIAN_QS.iter().enumerate() {
        let r = check_concavity(q, opts.hessian_samples, opts.seed.wrapping_add(k as u64))?;
        checks.push(Check::new(
            format!("hessian_q{q:.4}"),
            r.passed,
            r.samples,
            r.max_eigenvalue,
            format!(
                "max eigenvalue {:.3e}, fd rel error {:.3e}, factored rel error {:.3e}; swapped-ratio fd {:.3e}, s^q factored {:.3e}",
                r.max_eigenvalue,
                r.max_fd_rel_error,
                r.max_factored_rel_error,
                r.swapped_fd_rel_error,
                r.sq_factored_rel_error
            ),
        ));
    }
    Ok(checks)
}

fn gaussian_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for &d in &PROJECTION_DIMS {
        for (k, &x) in PROJECTION_LOW_XS.iter().chain(&PROJECTION_HIGH_XS).enumerate() {
            let r = gaussian_projection_test(d, 1.0, x, opts.projection_samples, opts.seed.wrapping_add(k as u64))?;
            let low = k < PROJECTION_LOW_XS.len();
            let (emp, bound, applicable) =
                if low { (r.empirical_low, r.bound_low, r.low_applicable) } else { (r.empirical_high, r.bound_high, r.high_applicable) };
            let passed = crate::rounding::within_binomial_slack(emp, bound, r.samples, 3.0);
            checks.push(Check::new(
                format!("{}_d{d}_x{x}", if low { "low" } else { "high" }),
                passed,
                r.samples,
                emp,
                format!("bound {bound:.4}{}", if applicable { "" } else { " (outside the lemma's stated range)" }),
            ));
        }
    }
    Ok(checks)
}

fn roundtrip_checks(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = derived_rng(opts.seed, "roundtrip-suite", 0);
    let mut checks = Vec::new();

    // Cut embeddings: feasible, objective equal to the cut size at every p.
    let (mut worst, mut infeasible, mut unequal) = (0.0f64, 0usize, 0usize);
    for _ in 0..opts.cut_pairs {
        let n = rng.random_range(4..=10);
        let g = Graph::gnp(n, 0.5, &mut rng)?;
        let s = random_balanced_cut(n, SUITE_C, &mut rng)?;
        let e = cut_to_embedding(&g, &s);
        let size = cut_size(&g, &s) as f64;
        let z = feasible_point_from_cut(&g, &s, SUITE_C)?;
        for &p in &EXPONENT_GRID {
            worst = worst.max((objective(&g, &e, p) - size).abs());
            if !check_feasibility(&e, RelaxationParams::new(p, SUITE_C)?, Tolerances::default()).feasible {
                infeasible += 1;
            }
            if objective_z(&g, &z, p, 0.0)? != size {
                unequal += 1;
            }
        }
    }
    checks.push(Check::new(
        "cut_embedding_exact",
        worst <= 1e-9 && infeasible == 0,
        opts.cut_pairs,
        worst,
        format!("{infeasible} infeasible (pair, p) combinations"),
    ));
    checks.push(Check::new(
        "cut_point_equal_across_p",
        unequal == 0,
        opts.cut_pairs,
        unequal as f64,
        "Z-form objective at cut points equals the cut size exactly",
    ));

    // Vector form against Z form, and the Gram factorisation.
    let (mut obj_gap, mut gram_gap) = (0.0f64, 0.0f64);
    for _ in 0..opts.cut_pairs {
        let n = rng.random_range(3..=10);
        let d = rng.random_range(1..=n);
        let g = Graph::gnp(n, 0.5, &mut rng)?;
        let e = Embedding::new((0..n).map(|_| random_unit_vector(d, &mut rng)).collect(), 1e-12)?;
        let gram = gram_from_embedding(&e);
        for &p in &EXPONENT_GRID {
            let via_z = objective_z(&g, &z_from_gram(&gram), p, 1e-12)?;
            obj_gap = obj_gap.max((objective(&g, &e, p) - via_z).abs());
        }
        let back = gram_from_embedding(&embedding_from_gram(&gram, Tolerances::default().psd)?);
        gram_gap = gram_gap.max((back.matrix() - gram.matrix()).amax());
    }
    checks.push(Check::new("objective_vector_vs_z", obj_gap <= 1e-8, opts.cut_pairs, obj_gap, "max |objective - objective_z|"));
    checks.push(Check::new("gram_roundtrip", gram_gap <= 1e-6, opts.cut_pairs, gram_gap, "max inner product change"));

    let mut mismatches = 0;
    for _ in 0..opts.cut_pairs {
        let g = Graph::gnp(rng.random_range(1..=12), 0.4, &mut rng)?;
        if Graph::parse_edge_list(&g.to_edge_list())? != g {
            mismatches += 1;
        }
    }
    checks.push(Check::new("edge_list_roundtrip", mismatches == 0, opts.cut_pairs, mismatches as f64, "graphs changed by write/parse"));
    Ok(checks)
}

/// The fixed soundness corpus: small named graphs plus ten seeded G(n, 1/2)
/// graphs with n cycling through 6, 8, 10.
pub fn soundness_corpus() -> Vec<(String, Graph)> {
    let petersen = Graph::petersen();
    let mut corpus = vec![
        ("C4".to_string(), Graph::cycle(4).expect("valid")),
        ("C6".to_string(), Graph::cycle(6).expect("valid")),
        ("C8".to_string(), Graph::cycle(8).expect("valid")),
        ("P5".to_string(), Graph::path(5).expect("valid")),
        ("K4".to_string(), Graph::complete(4).expect("valid")),
        ("K5".to_string(), Graph::complete(5).expect("valid")),
        ("K3,3".to_string(), Graph::complete_bipartite(3, 3).expect("valid")),
        ("Petersen".to_string(), petersen.clone()),
        ("Petersen-v0".to_string(), petersen.induced(&(1..10).collect::<Vec<_>>()).expect("valid")),
        ("Petersen-v0v1".to_string(), petersen.induced(&(2..10).collect::<Vec<_>>()).expect("valid")),
    ];
    for k in 0..10u64 {
        let n = [6, 8, 10][k as usize % 3];
        let g = Graph::gnp(n, 0.5, &mut derived_rng(CORPUS_SEED, "corpus", k)).expect("valid");
        corpus.push((format!("gnp{k}-n{n}"), g));
    }
    corpus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessRecord {
    pub graph: String,
    pub n: usize,
    pub p: f64,
    pub value: f64,
    pub exact: usize,
    pub feasible: bool,
    pub converged: bool,
    pub sound: bool,
}

#[derive(Debug, Clone)]
pub struct SoundnessSolution {
    pub record: SoundnessRecord,
    pub graph: Graph,
    /// Relaxation optimum in Gram form (converted from Z form when p < 2).
    pub gram: GramForm,
}

/// Solves every corpus instance at every exponent of the grid and compares
/// against the exact optimum. Instances run in parallel; output order is fixed.
pub fn soundness_solutions() -> Result<Vec<SoundnessSolution>> {
    let corpus = soundness_corpus();
    let jobs: Vec<(usize, f64)> = (0..corpus.len()).flat_map(|g| EXPONENT_GRID.map(|p| (g, p))).collect();
    jobs.par_iter()
        .map(|&(gi, p)| {
            let (name, g) = &corpus[gi];
            let exact = exact_balanced_separator(g, SUITE_C)?.1;
            let (gram, report) = if p == 2.0 {
                solve_sdp(g, SUITE_C, &SdpOptions::default())?
            } else {
                let (z, report) = solve_concave(g, SUITE_C, p, &ConcaveOptions::default())?;
                (gram_from_z(&z), report)
            };
            let record = SoundnessRecord {
                graph: name.clone(),
                n: g.n(),
                p,
                value: report.value,
                exact,
                feasible: report.residuals.feasible,
                converged: report.converged,
                sound: report.value <= exact as f64 + SOUNDNESS_TOL,
            };
            Ok(SoundnessSolution { record, graph: g.clone(), gram })
        })
        .collect()
}

pub fn soundness_records() -> Result<Vec<SoundnessRecord>> {
    Ok(soundness_solutions()?.into_iter().map(|s| s.record).collect())
}

fn soundness_checks() -> Result<Vec<Check>> {
    let records = soundness_records()?;
    let mut checks = Vec::new();
    for &p in &EXPONENT_GRID {
        let rs: Vec<&SoundnessRecord> = records.iter().filter(|r| r.p == p).collect();
        let worst = rs.iter().map(|r| r.value - r.exact as f64).fold(f64::NEG_INFINITY, f64::max);
        let unsound: Vec<&str> = rs.iter().filter(|r| !r.sound).map(|r| r.graph.as_str()).collect();
        let infeasible = rs.iter().filter(|r| !r.feasible).count();
        checks.push(Check::new(
            format!("sound_p{p}"),
            unsound.is_empty(),
            rs.len(),
            worst,
            if unsound.is_empty() {
                format!("max value - exact {worst:.3e}; {infeasible} reported infeasible")
            } else {
                format!("above exact: {}", unsound.join(", "))
            },
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyOptions {
        VerifyOptions { seed: 7, samples: 50, hessian_samples: 20, projection_samples: 10_000, cut_pairs: 10 }
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(Suite::parse_selector("all").unwrap().len(), 6);
        assert_eq!(Suite::parse_selector("hessian").unwrap(), vec![Suite::Hessian]);
        let err = Suite::parse_selector("nope").unwrap_err().to_string();
        assert!(err.contains("concavity") && err.contains("all"), "{err}");
    }

    #[test]
    fn random_points_are_feasible() {
        let mut rng = derived_rng(1, "t", 0);
        for &p in &CONCAVE_EXPONENTS {
            for n in 4..=8 {
                let z = random_feasible_z(n, p, &mut rng);
                assert!(z_feasibility(&z, p, SUITE_C, POINT_TOL).feasible);
            }
        }
    }

    #[test]
    fn cheap_suites_pass() {
        for suite in [Suite::Concavity, Suite::Convexity, Suite::Hessian, Suite::Gaussian, Suite::Roundtrip] {
            let r = run_suite(suite, &small()).unwrap();
            assert!(r.passed, "{r:#?}");
        }
    }

    #[test]
    fn corpus_shape() {
        let c = soundness_corpus();
        assert_eq!(c.len(), 20);
        assert!(c.iter().all(|(_, g)| g.n() <= 10));
        let again = soundness_corpus();
        assert!(c.iter().zip(&again).all(|(a, b)| a.1 == b.1));
    }
}
