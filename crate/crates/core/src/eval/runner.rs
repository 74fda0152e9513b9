use std::collections::HashSet;
use std::io::Write;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::llm::LlmProvider;
use crate::memory::MemoryStore;
use crate::orchestrator::{ApprovalMode, Session, SessionConfig, SessionDeps, SessionError, Status};
use crate::table::CustomerTable;

use super::metrics::{mean, score, MeanStd, Score};
use super::BenchmarkCase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub trial: usize,
    pub query_id: String,
    pub score: Score,
    pub status: Option<Status>,
    pub iterations: usize,
    pub error: Option<String>,
    /// Score of the audience after each iteration, carried forward past the
    /// last iteration the session ran, `max_iterations` entries long.
    pub per_iteration: Vec<Score>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_case: Vec<CaseResult>,
    pub trials: Vec<TrialSummary>,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationPoint {
    pub iteration: usize,
    pub precision: f64,
    pub recall: f64,
}

impl MetricsReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.accuracy).collect()
    }

    /// Mean precision and recall after each iteration, over all cases and trials.
    pub fn iteration_curve(&self) -> Vec<IterationPoint> {
        let depth = self.per_case.iter().map(|c| c.per_iteration.len()).max().unwrap_or(0);
        (0..depth)
            .map(|i| IterationPoint {
                iteration: i + 1,
                precision: mean(self.per_case.iter().map(|c| c.per_iteration[i].precision)),
                recall: mean(self.per_case.iter().map(|c| c.per_iteration[i].recall)),
            })
            .collect()
    }

    /// One row per (trial, case).
    pub fn write_case_csv<W: Write>(&self, strategy: &str, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "strategy",
            "trial",
            "query_id",
            "exact",
            "precision",
            "recall",
            "status",
            "iterations",
            "recall_by_iteration",
            "error",
        ])?;
        for c in &self.per_case {
            let status = c
                .status
                .map(|s| serde_json::to_value(s).expect("status serializes").as_str().unwrap_or("").to_string())
                .unwrap_or_default();
            let curve = c
                .per_iteration
                .iter()
                .map(|s| format!("{:.4}", s.recall))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                strategy,
                &(c.trial + 1).to_string(),
                &c.query_id,
                &c.score.exact.to_string(),
                &format!("{:.4}", c.score.precision),
                &format!("{:.4}", c.score.recall),
                &status,
                &c.iterations.to_string(),
                &curve,
                c.error.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Supplies a model for one (case, trial); an `Err` scores the case as failed.
pub type ProviderFactory<'a> = dyn Fn(&BenchmarkCase, usize) -> Result<Arc<dyn LlmProvider>, String> + 'a;

/// Run every case as an independent auto-mode session, `trials` times.
///
/// Cases run in order; each trial starts from a fresh copy of `memory`, and
/// self-learned insights carry over between cases of the same trial.
pub fn run_benchmark(
    cases: &[BenchmarkCase],
    table: &CustomerTable,
    memory: &MemoryStore,
    config: &SessionConfig,
    trials: usize,
    provider_for: &ProviderFactory<'_>,
) -> Result<MetricsReport, SessionError> {
    let mut base = config.clone();
    base.approval_mode = ApprovalMode::Auto;
    if base.max_iterations == 0 {
        return Err(SessionError::InvalidConfig("max_iterations must be at least 1".into()));
    }
    let mut per_case = Vec::new();
    let mut summaries = Vec::new();
    for trial in 0..trials {
        let store = Arc::new(RwLock::new(memory.clone()));
        let mut scores = Vec::with_capacity(cases.len());
        for case in cases {
            let mut cfg = base.clone();
            cfg.today = Some(case.today);
            let result = run_case(case, table, &store, cfg, trial, provider_for);
            scores.push(result.score);
            per_case.push(result);
        }
        summaries.push(TrialSummary {
            trial: trial + 1,
            accuracy: mean(scores.iter().map(|s| s.exact)),
            precision: mean(scores.iter().map(|s| s.precision)),
            recall: mean(scores.iter().map(|s| s.recall)),
        });
    }
    let pick = |f: fn(&TrialSummary) -> f64| MeanStd::of(&summaries.iter().map(f).collect::<Vec<_>>());
    Ok(MetricsReport {
        accuracy: pick(|t| t.accuracy),
        precision: pick(|t| t.precision),
        recall: pick(|t| t.recall),
        per_case,
        trials: summaries,
    })
}

fn run_case(
    case: &BenchmarkCase,
    table: &CustomerTable,
    store: &Arc<RwLock<MemoryStore>>,
    cfg: SessionConfig,
    trial: usize,
    provider_for: &ProviderFactory<'_>,
) -> CaseResult {
    let max_iterations = cfg.max_iterations;
    let failed = |error: String| CaseResult {
        trial,
        query_id: case.query_id.clone(),
        score: Score::ZERO,
        status: None,
        iterations: 0,
        error: Some(error),
        per_iteration: vec![Score::ZERO; max_iterations],
    };
    let llm = match provider_for(case, trial) {
        Ok(llm) => llm,
        Err(e) => return failed(e),
    };
    let deps = SessionDeps {
        table: table.clone(),
        memory: Arc::clone(store),
        llm,
    };
    let mut session = match Session::start(case.query_id.clone(), &case.query, cfg, deps) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    if let Err(e) = session.run_to_completion() {
        return failed(e.to_string());
    }
    let gold: HashSet<&str> = case.gold_ids.iter().map(String::as_str).collect();
    let score_ids = |ids: &[String]| score(&ids.iter().map(String::as_str).collect(), &gold);
    let state = session.state();
    if state.status == Status::Error {
        let mut r = failed(state.error.as_ref().map(|e| e.message.clone()).unwrap_or_default());
        r.status = Some(Status::Error);
        r.iterations = state.iteration;
        return r;
    }
    let mut per_iteration: Vec<Score> = session.iteration_audiences().iter().map(|ids| score_ids(ids)).collect();
    let last = per_iteration.last().copied().unwrap_or(Score::ZERO);
    per_iteration.resize(max_iterations.max(per_iteration.len()), last);
    CaseResult {
        trial,
        query_id: case.query_id.clone(),
        score: score_ids(&state.audience_ids),
        status: Some(state.status),
        iterations: state.iteration,
        error: None,
        per_iteration,
    }
}
