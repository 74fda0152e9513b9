//! Benchmark runner, metrics, significance test and synthetic data.

pub mod ablation;
pub mod mann_whitney;
pub mod metrics;
pub mod runner;
pub mod scripts;
pub mod synth;

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use ablation::{run_ablation, run_scripted, ScriptLibrary, AblationConfig, AblationError, AblationReport, Arm, ArmResult, CaseSet};
pub use mann_whitney::{mann_whitney_one_sided, MannWhitney, MannWhitneyError};
pub use metrics::{mean, score, MeanStd, Score};
pub use runner::{run_benchmark, CaseResult, IterationPoint, MetricsReport, ProviderFactory, TrialSummary};
pub use scripts::{ScriptArm, ScriptBook};
pub use synth::{generate_synthetic, GenConfig, GenError, SyntheticBench};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub query_id: String,
    pub query: String,
    pub gold_ids: Vec<String>,
    pub today: NaiveDate,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CaseFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

/// Read benchmark JSONL, skipping blank lines.
pub fn load_cases(path: &Path) -> Result<Vec<BenchmarkCase>, CaseFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| CaseFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_cases(&text)
}

pub fn parse_cases(text: &str) -> Result<Vec<BenchmarkCase>, CaseFileError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| CaseFileError::Parse { line: i + 1, source }))
        .collect()
}

pub fn cases_to_jsonl(cases: &[BenchmarkCase]) -> String {
    cases
        .iter()
        .map(|c| serde_json::to_string(c).expect("serializable") + "\n")
        .collect()
}
