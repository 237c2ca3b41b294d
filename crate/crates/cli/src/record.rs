//! Output records. JSON for single runs, CSV rows for batch aggregates; both
//! carry `schema_version`.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sepkit_core::rounding::{PipelineReport, ProjectionTestReport};
use sepkit_core::sdp::SolveReport;
use sepkit_core::verify::SuiteResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Keys whose values legitimately differ between identical runs.
pub const VOLATILE_KEYS: [&str; 2] = ["timestamp", "wall_time_secs"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphInfo {
    pub path: Option<String>,
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactResult {
    pub value: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationResult {
    pub p: f64,
    pub solver: String,
    pub report: SolveReport,
    pub artifact: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seed: u64,
    /// Parameters as given, after defaults were filled in.
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<RelaxationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<SuiteResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<ProjectionTestReport>>,
    pub passed: bool,
}

impl ExperimentRecord {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        ExperimentRecord {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            seed,
            config,
            graph: None,
            exact: None,
            relaxation: None,
            pipeline: None,
            suites: None,
            projection: None,
            passed: true,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }
}

/// Removes [`VOLATILE_KEYS`] at every depth, for comparing records across runs.
pub fn strip_volatile(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for key in VOLATILE_KEYS {
                map.remove(key);
            }
            map.values_mut().for_each(strip_volatile);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_volatile),
        _ => {}
    }
}

/// One line of the batch CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BatchRow {
    pub schema_version: u32,
    pub graph: String,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub c: f64,
    pub seed: u64,
    pub relaxation_value: Option<f64>,
    pub exact_value: Option<usize>,
    pub success: bool,
    pub attempts: usize,
    pub cut_size: Option<usize>,
    pub balance: Option<f64>,
    pub ratio: Option<f64>,
    /// Set when the graph could not be processed.
    pub error: Option<String>,
}
