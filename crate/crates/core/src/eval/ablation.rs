//! Strategy sweeps: each arm is a session configuration run over a case set.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::llm::LlmProvider;
use crate::memory::MemoryStore;
use crate::orchestrator::{SessionConfig, SessionError};
use crate::table::CustomerTable;

use super::mann_whitney::{mann_whitney_one_sided, MannWhitney};
use super::runner::{run_benchmark, IterationPoint, MetricsReport};
use super::scripts::{ScriptArm, ScriptBook};
use super::synth::SyntheticBench;
use super::BenchmarkCase;

/// The sweep used by `ramp bench` when no config file is given.
pub const DEFAULT_ABLATION: &str = r#"
trials = 3
baseline = "baseline"

[[arm]]
name = "ramp"
script = "with_memory"
n_semantic = 6
n_episodic = 2

[[arm]]
name = "no_memory"
script = "no_memory"
n_semantic = 0
n_episodic = 0

[[arm]]
name = "baseline"
script = "actor_only"
use_planner = false
verify = false
reflect = false
n_semantic = 0
n_episodic = 0

[[arm]]
name = "challenge"
cases = "challenge"
n_semantic = 2
n_episodic = 2
max_iterations = 3
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseSet {
    #[default]
    Filter,
    Challenge,
}

fn yes() -> bool {
    true
}

fn three() -> usize {
    3
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub name: String,
    /// Which scripted responses to replay; ignored for live models and for
    /// challenge arms, which always use the challenge scripts.
    #[serde(default)]
    pub script: Option<ScriptArm>,
    #[serde(default)]
    pub cases: CaseSet,
    #[serde(default = "yes")]
    pub use_planner: bool,
    #[serde(default = "two")]
    pub n_semantic: usize,
    #[serde(default = "two")]
    pub n_episodic: usize,
    #[serde(default = "yes")]
    pub verify: bool,
    #[serde(default = "yes")]
    pub reflect: bool,
    #[serde(default)]
    pub self_learning: bool,
    #[serde(default = "three")]
    pub max_iterations: usize,
}

impl Arm {
    pub fn session_config(&self, model_id: &str) -> SessionConfig {
        SessionConfig {
            n_semantic: self.n_semantic,
            n_episodic: self.n_episodic,
            max_iterations: self.max_iterations,
            self_learning: self.self_learning,
            today: None,
            approval_mode: Default::default(),
            model_id: model_id.to_string(),
            use_planner: self.use_planner,
            verify: self.verify,
            reflect: self.reflect,
        }
    }

    fn script_arm(&self) -> ScriptArm {
        self.script.unwrap_or(ScriptArm::WithMemory)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    #[serde(default = "three")]
    pub trials: usize,
    /// Arm every other arm is tested against.
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(rename = "arm")]
    pub arms: Vec<Arm>,
}

#[derive(Debug, thiserror::Error)]
pub enum AblationError {
    #[error("invalid ablation config: {0}")]
    Config(String),
    #[error("cannot read ablation config: {0}")]
    Io(#[from] std::io::Error),
    #[error("arm `{arm}`: {source}")]
    Session { arm: String, source: SessionError },
}

impl AblationConfig {
    pub fn parse(text: &str) -> Result<Self, AblationError> {
        let cfg: AblationConfig = toml::from_str(text).map_err(|e| AblationError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AblationError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn default_sweep() -> Self {
        Self::parse(DEFAULT_ABLATION).expect("built-in sweep is valid")
    }

    fn validate(&self) -> Result<(), AblationError> {
        if self.trials == 0 {
            return Err(AblationError::Config("trials must be at least 1".into()));
        }
        if self.arms.is_empty() {
            return Err(AblationError::Config("no arms".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for arm in &self.arms {
            if !seen.insert(arm.name.as_str()) {
                return Err(AblationError::Config(format!("duplicate arm `{}`", arm.name)));
            }
            if arm.max_iterations == 0 {
                return Err(AblationError::Config(format!("arm `{}`: max_iterations must be at least 1", arm.name)));
            }
        }
        if let Some(b) = &self.baseline {
            if !seen.contains(b.as_str()) {
                return Err(AblationError::Config(format!("baseline `{b}` is not an arm")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub report: MetricsReport,
    pub curve: Vec<IterationPoint>,
    /// Per-trial accuracy against the baseline arm, alternative "this > baseline".
    pub vs_baseline: Option<MannWhitney>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub trials: usize,
    pub baseline: Option<String>,
    pub arms: Vec<ArmResult>,
}

impl AblationReport {
    pub fn arm(&self, name: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm.name == name)
    }

    /// One row per strategy.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "strategy",
            "cases",
            "trials",
            "accuracy_mean",
            "accuracy_std",
            "precision_mean",
            "precision_std",
            "recall_mean",
            "recall_std",
            "mw_u",
            "mw_p",
        ])?;
        for r in &self.arms {
            let m = &r.report;
            let (u, p) = r
                .vs_baseline
                .map(|t| (format!("{}", t.u), format!("{:.4}", t.p)))
                .unwrap_or_default();
            let cases = match r.arm.cases {
                CaseSet::Filter => "filter",
                CaseSet::Challenge => "challenge",
            };
            w.write_record([
                r.arm.name.as_str(),
                cases,
                &self.trials.to_string(),
                &format!("{:.4}", m.accuracy.mean),
                &format!("{:.4}", m.accuracy.std),
                &format!("{:.4}", m.precision.mean),
                &format!("{:.4}", m.precision.std),
                &format!("{:.4}", m.recall.mean),
                &format!("{:.4}", m.recall.std),
                &u,
                &p,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-case rows for every arm, under one header.
    pub fn write_case_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut buf = Vec::new();
        for (i, r) in self.arms.iter().enumerate() {
            let mut part = Vec::new();
            r.report.write_case_csv(&r.arm.name, &mut part)?;
            let text = String::from_utf8(part).expect("csv output is utf-8");
            let body = if i == 0 { &text[..] } else { text.split_once('\n').map_or("", |(_, b)| b) };
            buf.extend_from_slice(body.as_bytes());
        }
        let mut writer = writer;
        writer.write_all(&buf)?;
        Ok(())
    }
}

/// Supplies a model for one (arm, case, trial).
pub type ArmProviderFactory<'a> =
    dyn Fn(&Arm, &BenchmarkCase, usize) -> Result<Arc<dyn LlmProvider>, String> + 'a;

/// Run every arm, then test each arm's per-trial accuracy against the baseline.
pub fn run_ablation(
    cfg: &AblationConfig,
    filter_cases: &[BenchmarkCase],
    challenge_cases: &[BenchmarkCase],
    table: &CustomerTable,
    memory: &MemoryStore,
    model_id: &str,
    provider_for: &ArmProviderFactory<'_>,
) -> Result<AblationReport, AblationError> {
    cfg.validate()?;
    let mut arms = Vec::with_capacity(cfg.arms.len());
    for arm in &cfg.arms {
        let cases = match arm.cases {
            CaseSet::Filter => filter_cases,
            CaseSet::Challenge => challenge_cases,
        };
        log::info!("arm {}: {} cases x {} trials", arm.name, cases.len(), cfg.trials);
        let report = run_benchmark(
            cases,
            table,
            memory,
            &arm.session_config(model_id),
            cfg.trials,
            &|case, trial| provider_for(arm, case, trial),
        )
        .map_err(|source| AblationError::Session {
            arm: arm.name.clone(),
            source,
        })?;
        arms.push(ArmResult {
            curve: report.iteration_curve(),
            arm: arm.clone(),
            report,
            vs_baseline: None,
        });
    }
    if let Some(base) = &cfg.baseline {
        let base_acc = arms
            .iter()
            .find(|a| &a.arm.name == base)
            .map(|a| a.report.accuracies())
            .unwrap_or_default();
        for r in arms.iter_mut().filter(|a| &a.arm.name != base) {
            r.vs_baseline = mann_whitney_one_sided(&r.report.accuracies(), &base_acc).ok();
        }
    }
    Ok(AblationReport {
        trials: cfg.trials,
        baseline: cfg.baseline.clone(),
        arms,
    })
}

/// Scripted responses for every arm of a synthetic benchmark.
#[derive(Debug, Clone, Default)]
pub struct ScriptLibrary {
    pub filter: BTreeMap<ScriptArm, ScriptBook>,
    pub challenge: ScriptBook,
}

impl ScriptLibrary {
    pub fn for_bench(bench: &SyntheticBench) -> Self {
        ScriptLibrary {
            filter: ScriptArm::ALL
                .into_iter()
                .map(|a| (a, ScriptBook::for_cases(&bench.cases, a)))
                .collect(),
            challenge: ScriptBook::for_challenges(&bench.challenges),
        }
    }

    pub fn file_name(arm: ScriptArm) -> String {
        format!("scripts_{}.jsonl", arm.as_str())
    }

    pub const CHALLENGE_FILE: &'static str = "scripts_challenge.jsonl";

    /// Load whichever script files exist in `dir`.
    pub fn load(dir: &Path) -> Result<Self, crate::llm::LlmError> {
        let mut lib = ScriptLibrary::default();
        for arm in ScriptArm::ALL {
            let path = dir.join(Self::file_name(arm));
            if path.exists() {
                lib.filter.insert(arm, ScriptBook::load(&path)?);
            }
        }
        let path = dir.join(Self::CHALLENGE_FILE);
        if path.exists() {
            lib.challenge = ScriptBook::load(&path)?;
        }
        Ok(lib)
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        for (arm, book) in &self.filter {
            std::fs::write(dir.join(Self::file_name(*arm)), book.to_jsonl())?;
        }
        std::fs::write(dir.join(Self::CHALLENGE_FILE), self.challenge.to_jsonl())
    }

    pub fn book(&self, arm: &Arm) -> Option<&ScriptBook> {
        match arm.cases {
            CaseSet::Challenge => Some(&self.challenge),
            CaseSet::Filter => self.filter.get(&arm.script_arm()),
        }
    }

    pub fn provider(&self, arm: &Arm, case: &BenchmarkCase) -> Result<Arc<dyn LlmProvider>, String> {
        let book = self
            .book(arm)
            .ok_or_else(|| format!("no `{}` scripts loaded", arm.script_arm().as_str()))?;
        if !book.contains(&case.query_id) {
            return Err(format!("no script for {}", case.query_id));
        }
        Ok(Arc::new(book.provider(&case.query_id)))
    }
}

/// Run `cfg` over a generated benchmark with its scripted responses.
pub fn run_scripted(cfg: &AblationConfig, bench: &SyntheticBench) -> Result<AblationReport, AblationError> {
    let lib = ScriptLibrary::for_bench(bench);
    let filter: Vec<BenchmarkCase> = bench.cases.iter().map(|c| c.case.clone()).collect();
    let challenge: Vec<BenchmarkCase> = bench.challenges.iter().map(|c| c.case.clone()).collect();
    run_ablation(
        cfg,
        &filter,
        &challenge,
        &bench.table,
        &super::synth::default_memories(),
        "scripted",
        &|arm, case, _| lib.provider(arm, case),
    )
}
