//! Command-line harness: exact oracle, relaxation solves, the rounding
//! pipeline (single graph or batch), property suites, DIMACS conversion and
//! the projection Monte Carlo.
//!
//! Exit codes: 0 success, 1 verification or rounding failure, 2 usage or I/O
//! error.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use sepkit_core::concave::{solve_concave, ConcaveOptions};
use sepkit_core::embedding::{embedding_from_gram, gram_from_z, objective, Embedding, Tolerances};
use sepkit_core::graph::{exact_balanced_separator, Graph};
use sepkit_core::rng::derive_seed;
use sepkit_core::rounding::{
    gaussian_projection_test, pipeline, round_embedding, DeltaChoice, PipelineOptions, PipelineReport,
};
use sepkit_core::sdp::{solve_sdp, SdpOptions, WarmStart};
use sepkit_core::verify::{run_suites, Suite, VerifyOptions};
use sepkit_core::Error as CoreError;

pub mod record;

pub use record::{strip_volatile, BatchRow, ExperimentRecord, SCHEMA_VERSION};
use record::{ExactResult, GraphInfo, RelaxationResult};

#[derive(Debug, Parser)]
#[command(name = "sepkit", version, about = "Balanced separator relaxations, rounding and property suites")]
pub struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, env = "SEPKIT_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact c-balanced separator by enumeration (n <= 20).
    Exact(ExactArgs),
    /// Solve the relaxation: SDP at p = 2, concave program for 0 < p < 2.
    Solve(SolveArgs),
    /// Relaxation, set-find and region growing, on one graph or a directory.
    Pipeline(PipelineArgs),
    /// Run property suites.
    Verify(VerifyArgs),
    /// Convert a DIMACS graph to the edge-list format.
    ConvertDimacs(ConvertArgs),
    /// Monte Carlo check of the random projection bounds.
    GaussianTest(GaussianArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub c: f64,
    /// Write the record here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStartArg {
    Auto,
    Cut,
    Orthonormal,
}

impl From<WarmStartArg> for WarmStart {
    fn from(w: WarmStartArg) -> Self {
        match w {
            WarmStartArg::Auto => WarmStart::Auto,
            WarmStartArg::Cut => WarmStart::Cut,
            WarmStartArg::Orthonormal => WarmStart::Orthonormal,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// SDP feasibility tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = WarmStartArg::Auto)]
    pub warm_start: WarmStartArg,
    /// Cut-seeded starts of the concave solver.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
}

impl SolverArgs {
    fn sdp(&self, seed: u64) -> SdpOptions {
        SdpOptions { tol: self.tol, max_iter: self.max_iter, triangle_batch: None, seed, warm_start: self.warm_start.into() }
    }

    fn concave(&self, seed: u64) -> ConcaveOptions {
        ConcaveOptions {
            starts: self.starts,
            inner_tol: self.inner_tol,
            max_outer: self.max_outer,
            max_iter: self.max_iter,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0.25)]
    pub c: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Write the Gram (p = 2) or Z (p < 2) matrix JSON here.
    #[arg(long)]
    pub artifact: Option<PathBuf>,
    /// Write the factored vector embedding JSON here, for `pipeline --embedding`.
    #[arg(long)]
    pub embedding_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long, required_unless_present = "graph_dir", conflicts_with = "graph_dir")]
    pub graph: Option<PathBuf>,
    /// Run every file in this directory; emits one record per graph and a CSV.
    #[arg(long)]
    pub graph_dir: Option<PathBuf>,
    /// Round this embedding JSON instead of solving the relaxation.
    #[arg(long, conflicts_with = "graph_dir")]
    pub embedding: Option<PathBuf>,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0.25)]
    pub c: f64,
    /// Fixed separation target; the default is `--delta-auto`.
    #[arg(long, conflicts_with = "delta_auto")]
    pub delta: Option<f64>,
    /// Separation target `b (ln n)^(-(1 + p/2)/3)`.
    #[arg(long)]
    pub delta_auto: bool,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Defaults to c / 4.
    #[arg(long)]
    pub c_prime: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub b_const: f64,
    #[arg(long, default_value_t = 64)]
    pub retries: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Concurrent graphs in batch mode.
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    pub jobs: usize,
    /// Batch aggregate CSV; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    /// Record file (single graph) or directory of records (batch).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl PipelineArgs {
    fn options(&self, seed: u64) -> PipelineOptions {
        PipelineOptions {
            delta: self.delta.map_or(DeltaChoice::Auto, DeltaChoice::Fixed),
            sigma: self.sigma,
            c_prime: self.c_prime,
            b_const: self.b_const,
            retries: self.retries,
            seed,
            sdp: self.solver.sdp(seed),
            concave: self.solver.concave(seed),
        }
    }
}

/// `all` or one suite name.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SuiteSelector(pub Vec<Suite>);

fn parse_suites(s: &str) -> std::result::Result<SuiteSelector, String> {
    Suite::parse_selector(s).map(SuiteSelector).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// One of concavity, convexity, hessian, gaussian, roundtrip, soundness, all.
    #[arg(long, default_value = "all", value_parser = parse_suites)]
    pub suite: SuiteSelector,
    /// Pairs per exponent in the concavity and convexity suites.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GaussianArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    /// One or more multiples of `l / sqrt(d)`.
    #[arg(long, required = true, num_args = 1..)]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read graph file {}", path.display()))?;
    Graph::parse_edge_list(&text).with_context(|| format!("cannot parse graph file {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn graph_info(path: Option<&Path>, g: &Graph) -> GraphInfo {
    GraphInfo { path: path.map(|p| p.display().to_string()), n: g.n(), m: g.edge_count() }
}

fn config<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 2.0) {
        bail!(CoreError::InvalidParameter(format!("p must lie in (0, 2], got {p}")));
    }
    Ok(())
}

pub fn cmd_exact(args: &ExactArgs, seed: u64) -> Result<ExperimentRecord> {
    let g = read_graph(&args.graph)?;
    let (cut, value) = exact_balanced_separator(&g, args.c).map_err(|e| match e {
        CoreError::BruteForceCap { .. } => {
            anyhow::anyhow!("{e}; use `sepkit solve` for a relaxation lower bound on larger graphs")
        }
        e => e.into(),
    })?;
    let mut record = ExperimentRecord::new("exact", seed, config(args));
    record.graph = Some(graph_info(Some(&args.graph), &g));
    record.exact = Some(ExactResult { value, members: cut.members().to_vec() });
    Ok(record)
}

pub fn cmd_solve(args: &SolveArgs, seed: u64) -> Result<ExperimentRecord> {
    check_p(args.p)?;
    let g = read_graph(&args.graph)?;
    let solver_seed = derive_seed(seed, "solver", 0);
    let (gram, report, solver) = if args.p == 2.0 {
        let (x, report) = solve_sdp(&g, args.c, &args.solver.sdp(solver_seed))?;
        if let Some(path) = &args.artifact {
            write_json(path, &x)?;
        }
        (x, report, "sdp")
    } else {
        let (z, report) = solve_concave(&g, args.c, args.p, &args.solver.concave(solver_seed))?;
        if let Some(path) = &args.artifact {
            write_json(path, &z)?;
        }
        (gram_from_z(&z), report, "concave")
    };
    if let Some(path) = &args.embedding_out {
        write_json(path, &embedding_from_gram(&gram, Tolerances::default().psd)?)?;
    }
    let mut record = ExperimentRecord::new("solve", seed, config(args));
    record.graph = Some(graph_info(Some(&args.graph), &g));
    record.passed = report.residuals.feasible;
    record.relaxation = Some(RelaxationResult {
        p: args.p,
        solver: solver.to_string(),
        report,
        artifact: args.artifact.as_ref().map(|p| p.display().to_string()),
    });
    Ok(record)
}

fn pipeline_on(g: &Graph, args: &PipelineArgs, seed: u64) -> Result<PipelineReport> {
    let opts = args.options(seed);
    match &args.embedding {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read embedding {}", path.display()))?;
            let e: Embedding =
                serde_json::from_str(&text).with_context(|| format!("cannot parse embedding {}", path.display()))?;
            if e.n() != g.n() {
                bail!("embedding {} has {} vectors but the graph has {} vertices", path.display(), e.n(), g.n());
            }
            let value = objective(g, &e, args.p);
            Ok(round_embedding(g, &e, args.c, args.p, value, &opts)?)
        }
        None => Ok(pipeline(g, args.c, args.p, &opts)?),
    }
}

/// Single-graph pipeline; `passed` is false when every set-find attempt failed.
pub fn cmd_pipeline(args: &PipelineArgs, seed: u64) -> Result<ExperimentRecord> {
    check_p(args.p)?;
    let path = args.graph.as_ref().context("--graph is required outside batch mode")?;
    let g = read_graph(path)?;
    let report = pipeline_on(&g, args, seed)?;
    let mut record = ExperimentRecord::new("pipeline", seed, config(args));
    record.graph = Some(graph_info(Some(path), &g));
    record.passed = report.success;
    record.pipeline = Some(report);
    Ok(record)
}

/// Graph files of a batch directory: regular, non-hidden, sorted by name.
pub fn batch_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read directory {}", dir.display()))? {
        let path = entry?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_none_or(|n| n.starts_with('.'));
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub struct BatchOutcome {
    pub rows: Vec<BatchRow>,
    pub records: Vec<Option<ExperimentRecord>>,
}

impl BatchOutcome {
    pub fn any_error(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.success)
    }
}

/// Runs the pipeline on every graph of `--graph-dir`, up to `--jobs` at a
/// time. Each graph's seed is derived from the root seed and its file name,
/// so records do not depend on scheduling or on the other files present.
pub fn cmd_pipeline_batch(args: &PipelineArgs, seed: u64) -> Result<BatchOutcome> {
    check_p(args.p)?;
    let dir = args.graph_dir.as_ref().context("--graph-dir is required in batch mode")?;
    let files = batch_files(dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let results: Vec<(BatchRow, Option<ExperimentRecord>)> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let graph_seed = derive_seed(seed, &name, 0);
                let run = || -> Result<ExperimentRecord> {
                    let g = read_graph(path)?;
                    let report = pipeline_on(&g, args, graph_seed)?;
                    let mut record = ExperimentRecord::new("pipeline", graph_seed, config(args));
                    record.graph = Some(graph_info(Some(path), &g));
                    record.passed = report.success;
                    record.pipeline = Some(report);
                    Ok(record)
                };
                match run() {
                    Ok(record) => {
                        let r = record.pipeline.as_ref().expect("set above");
                        let info = record.graph.as_ref().expect("set above");
                        let row = BatchRow {
                            schema_version: SCHEMA_VERSION,
                            graph: name,
                            n: info.n,
                            m: info.m,
                            p: args.p,
                            c: args.c,
                            seed: graph_seed,
                            relaxation_value: Some(r.relaxation_value),
                            exact_value: r.exact_value,
                            success: r.success,
                            attempts: r.attempts,
                            cut_size: r.cut_size,
                            balance: r.balance,
                            ratio: r.ratio,
                            error: None,
                        };
                        (row, Some(record))
                    }
                    Err(e) => {
                        let row = BatchRow {
                            schema_version: SCHEMA_VERSION,
                            graph: name,
                            n: 0,
                            m: 0,
                            p: args.p,
                            c: args.c,
                            seed: graph_seed,
                            relaxation_value: None,
                            exact_value: None,
                            success: false,
                            attempts: 0,
                            cut_size: None,
                            balance: None,
                            ratio: None,
                            error: Some(format!("{e:#}")),
                        };
                        (row, None)
                    }
                }
            })
            .collect()
    });
    let (rows, records) = results.into_iter().unzip();
    Ok(BatchOutcome { rows, records })
}

pub fn write_csv(rows: &[BatchRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs, seed: u64) -> Result<ExperimentRecord> {
    let opts = VerifyOptions { seed, samples: args.samples, ..VerifyOptions::default() };
    let results = run_suites(&args.suite.0, &opts)?;
    let mut record = ExperimentRecord::new("verify", seed, config(args));
    record.passed = results.iter().all(|r| r.passed);
    record.suites = Some(results);
    Ok(record)
}

pub fn cmd_convert_dimacs(args: &ConvertArgs) -> Result<Graph> {
    let text =
        fs::read_to_string(&args.input).with_context(|| format!("cannot read DIMACS file {}", args.input.display()))?;
    let g = Graph::parse_dimacs(&text).with_context(|| format!("cannot parse DIMACS file {}", args.input.display()))?;
    fs::write(&args.output, g.to_edge_list()).with_context(|| format!("cannot write {}", args.output.display()))?;
    Ok(g)
}

pub fn cmd_gaussian(args: &GaussianArgs, seed: u64) -> Result<ExperimentRecord> {
    let reports = args
        .x
        .iter()
        .enumerate()
        .map(|(k, &x)| gaussian_projection_test(args.d, args.l, x, args.samples, derive_seed(seed, "gaussian", k as u64)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut record = ExperimentRecord::new("gaussian-test", seed, config(args));
    record.passed = reports.iter().all(|r| r.within_bounds(3.0));
    record.projection = Some(reports);
    Ok(record)
}

fn emit(record: &ExperimentRecord, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(path, record),
        None => {
            println!("{}", record.to_json());
            Ok(())
        }
    }
}

/// Runs a parsed command. `Ok(false)` means a verification or rounding
/// failure (exit 1); errors map to exit 2.
pub fn run(cli: &Cli) -> Result<bool> {
    let seed = cli.seed;
    match &cli.command {
        Command::Exact(args) => {
            let r = cmd_exact(args, seed)?;
            emit(&r, args.out.as_deref())?;
            Ok(r.passed)
        }
        Command::Solve(args) => {
            let r = cmd_solve(args, seed)?;
            emit(&r, args.out.as_deref())?;
            Ok(r.passed)
        }
        Command::Pipeline(args) if args.graph_dir.is_some() => {
            let outcome = cmd_pipeline_batch(args, seed)?;
            if let Some(dir) = &args.out {
                fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
                for (row, record) in outcome.rows.iter().zip(&outcome.records) {
                    if let Some(record) = record {
                        write_json(&dir.join(format!("{}.json", row.graph)), record)?;
                    }
                }
            }
            match &args.csv {
                Some(path) => {
                    let f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
                    write_csv(&outcome.rows, f)?;
                }
                None => write_csv(&outcome.rows, std::io::stdout())?,
            }
            if outcome.any_error() {
                let failed: Vec<String> =
                    outcome.rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.graph))).collect();
                bail!("{} graph(s) failed:\n{}", failed.len(), failed.join("\n"));
            }
            Ok(outcome.all_succeeded())
        }
        Command::Pipeline(args) => {
            let r = cmd_pipeline(args, seed)?;
            emit(&r, args.out.as_deref())?;
            Ok(r.passed)
        }
        Command::Verify(args) => {
            let r = cmd_verify(args, seed)?;
            emit(&r, args.out.as_deref())?;
            Ok(r.passed)
        }
        Command::ConvertDimacs(args) => {
            let g = cmd_convert_dimacs(args)?;
            eprintln!("wrote {} ({} vertices, {} edges)", args.output.display(), g.n(), g.edge_count());
            Ok(true)
        }
        Command::GaussianTest(args) => {
            let r = cmd_gaussian(args, seed)?;
            emit(&r, args.out.as_deref())?;
            Ok(r.passed)
        }
    }
}
