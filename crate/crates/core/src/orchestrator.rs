//! The plan → act → verify → reflect loop as an explicit state machine.
//!
//! A [`Session`] advances one phase per [`Session::step`] call and records
//! every transition in an append-only transcript. In interactive mode the
//! loop pauses after a failed verification until [`Session::submit_decision`].

use std::sync::{Arc, RwLock};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agent::{AgentError, ModelHandle};
use crate::llm::LlmProvider;
use crate::memory::{MemoryKind, MemoryStore, RetrievalConfig};
use crate::planner::{self, ActorContext, Plan};
use crate::reflector::{self, Reflection};
use crate::table::CustomerTable;
use crate::verifier::{self, CompiledRule, RuleCache, VerificationReport, VerificationRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApprovalMode {
    #[default]
    Auto,
    Interactive,
}

fn yes() -> bool {
    true
}

fn default_iterations() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default)]
    pub n_semantic: usize,
    #[serde(default)]
    pub n_episodic: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub self_learning: bool,
    pub today: Option<NaiveDate>,
    #[serde(default)]
    pub approval_mode: ApprovalMode,
    #[serde(default)]
    pub model_id: String,
    /// When off, the query itself is the only plan step.
    #[serde(default = "yes")]
    pub use_planner: bool,
    /// When off, the first audience is final.
    #[serde(default = "yes")]
    pub verify: bool,
    /// When off, failed rules go straight back to the planner as feedback.
    #[serde(default = "yes")]
    pub reflect: bool,
}

impl SessionConfig {
    pub fn new(today: NaiveDate) -> Self {
        SessionConfig {
            n_semantic: 2,
            n_episodic: 2,
            max_iterations: default_iterations(),
            self_learning: false,
            today: Some(today),
            approval_mode: ApprovalMode::Auto,
            model_id: String::new(),
            use_planner: true,
            verify: true,
            reflect: true,
        }
    }

    pub fn validate(&self) -> Result<NaiveDate, SessionError> {
        if self.max_iterations == 0 {
            return Err(SessionError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        self.today
            .ok_or_else(|| SessionError::InvalidConfig("today is required".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Acting,
    Verifying,
    AwaitingDecision,
    Reflecting,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Success,
    BudgetExhausted,
    NoChange,
    UserStopped,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Plan,
    CompiledStep,
    AudienceSummary,
    RuleResult,
    Reflection,
    Decision,
    Insight,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Value,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFailure {
    pub phase: Phase,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Proceed,
    Stop,
    Amend { text: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("operation not allowed in phase {actual:?}")]
    WrongPhase { actual: Phase },
    #[error("session has finished")]
    Finished,
    #[error("run_to_completion requires approval_mode=auto")]
    NotAuto,
    #[error("amended query must not be empty")]
    EmptyAmendment,
}

/// Serializable snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub original_query: String,
    pub working_query: String,
    pub phase: Phase,
    pub iteration: usize,
    pub plan: Option<Plan>,
    pub audience_ids: Vec<String>,
    pub report: Option<VerificationReport>,
    pub status: Status,
    pub error: Option<SessionFailure>,
    pub config: SessionConfig,
    pub transcript: Vec<TranscriptEvent>,
}

/// The model, memory and table a session runs against.
#[derive(Clone)]
pub struct SessionDeps {
    pub table: CustomerTable,
    pub memory: Arc<RwLock<MemoryStore>>,
    pub llm: Arc<dyn LlmProvider>,
}

pub struct Session {
    state: SessionState,
    today: NaiveDate,
    deps: SessionDeps,
    metadata: String,
    cache: RuleCache,
    feedback: String,
    audience: Option<CustomerTable>,
    rules: Vec<String>,
    reflection: Option<Reflection>,
    /// Audience ids after each acting phase, in order.
    history: Vec<Vec<String>>,
}

fn retrieval(n: usize) -> RetrievalConfig {
    RetrievalConfig::top(n)
}

impl Session {
    pub fn start(
        session_id: impl Into<String>,
        query: &str,
        config: SessionConfig,
        deps: SessionDeps,
    ) -> Result<Self, SessionError> {
        let today = config.validate()?;
        if query.trim().is_empty() {
            return Err(SessionError::InvalidConfig("query must not be empty".into()));
        }
        let metadata = deps.table.metadata_summary();
        Ok(Session {
            state: SessionState {
                session_id: session_id.into(),
                original_query: query.to_string(),
                working_query: query.to_string(),
                phase: Phase::Planning,
                iteration: 1,
                plan: None,
                audience_ids: Vec::new(),
                report: None,
                status: Status::Running,
                error: None,
                config,
                transcript: Vec::new(),
            },
            today,
            deps,
            metadata,
            cache: RuleCache::default(),
            feedback: String::new(),
            audience: None,
            rules: Vec::new(),
            reflection: None,
            history: Vec::new(),
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn id(&self) -> &str {
        &self.state.session_id
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn status(&self) -> Status {
        self.state.status
    }

    /// Current audience (empty before the first acting phase).
    pub fn audience(&self) -> CustomerTable {
        self.audience
            .clone()
            .unwrap_or_else(|| self.deps.table.with_rows(Vec::new()))
    }

    /// Audience ids produced by each iteration's acting phase.
    pub fn iteration_audiences(&self) -> &[Vec<String>] {
        &self.history
    }

    pub fn last_reflection(&self) -> Option<&Reflection> {
        self.reflection.as_ref()
    }

    /// Events with `seq > after`.
    pub fn events_after(&self, after: Option<u64>) -> &[TranscriptEvent] {
        let t = &self.state.transcript;
        match after {
            None => t,
            Some(after) => {
                let start = t.partition_point(|e| e.seq <= after);
                &t[start..]
            }
        }
    }

    /// The transcript as JSON lines with timestamps removed, for replay comparison.
    pub fn transcript_fingerprint(&self) -> String {
        self.state
            .transcript
            .iter()
            .map(|e| json!({"seq": e.seq, "kind": e.kind, "payload": e.payload}).to_string())
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn emit(&mut self, kind: EventKind, payload: Value) {
        let seq = self.state.transcript.len() as u64 + 1;
        self.state.transcript.push(TranscriptEvent {
            seq,
            kind,
            payload,
            timestamp: Utc::now(),
        });
    }

    fn finish(&mut self, status: Status) {
        self.state.phase = Phase::Done;
        self.state.status = status;
    }

    fn fail(&mut self, phase: Phase, err: &dyn std::fmt::Display) {
        let message = err.to_string();
        self.emit(
            EventKind::Error,
            json!({"iteration": self.state.iteration, "phase": phase, "message": message}),
        );
        self.state.error = Some(SessionFailure { phase, message });
        self.finish(Status::Error);
    }

    /// Advance exactly one phase. Agent failures end the session with
    /// `status=error`; they are not returned as `Err`.
    pub fn step(&mut self) -> Result<&SessionState, SessionError> {
        if self.state.status != Status::Running {
            return Err(SessionError::Finished);
        }
        let phase = self.state.phase;
        let outcome = match phase {
            Phase::Planning => self.plan(),
            Phase::Acting => self.act(),
            Phase::Verifying => self.verify(),
            Phase::Reflecting => self.reflect(),
            Phase::AwaitingDecision => return Err(SessionError::WrongPhase { actual: phase }),
            Phase::Done => return Err(SessionError::Finished),
        };
        if let Err(e) = outcome {
            self.fail(phase, &e);
        }
        Ok(&self.state)
    }

    /// Step until the session leaves `running`.
    pub fn run_to_completion(&mut self) -> Result<&SessionState, SessionError> {
        if self.state.config.approval_mode != ApprovalMode::Auto {
            return Err(SessionError::NotAuto);
        }
        while self.state.status == Status::Running {
            self.step()?;
        }
        Ok(&self.state)
    }

    pub fn submit_decision(&mut self, decision: Decision) -> Result<&SessionState, SessionError> {
        if self.state.phase != Phase::AwaitingDecision {
            return Err(SessionError::WrongPhase {
                actual: self.state.phase,
            });
        }
        if let Decision::Amend { text } = &decision {
            if text.trim().is_empty() {
                return Err(SessionError::EmptyAmendment);
            }
        }
        self.emit(
            EventKind::Decision,
            json!({"iteration": self.state.iteration, "decision": decision}),
        );
        match decision {
            Decision::Proceed => self.state.phase = Phase::Reflecting,
            Decision::Stop => self.finish(Status::UserStopped),
            Decision::Amend { text } => {
                self.state.working_query = text;
                self.feedback.clear();
                self.next_iteration();
            }
        }
        Ok(&self.state)
    }

    fn model(&self) -> ModelHandle<'_> {
        ModelHandle::new(self.deps.llm.as_ref(), &self.state.config.model_id)
    }

    fn next_iteration(&mut self) {
        if self.state.iteration + 1 > self.state.config.max_iterations {
            self.finish(Status::BudgetExhausted);
        } else {
            self.state.iteration += 1;
            self.state.phase = Phase::Planning;
        }
    }

    fn plan(&mut self) -> Result<(), AgentError> {
        let cfg = &self.state.config;
        let query = self.state.working_query.clone();
        let memories = self
            .deps
            .memory
            .read()
            .unwrap()
            .retrieve(MemoryKind::Semantic, &query, &retrieval(cfg.n_semantic));
        let plan = if cfg.use_planner {
            planner::make_plan(&query, &self.metadata, &self.feedback, &memories, self.model())?
        } else {
            Plan::single(&query)
        };
        self.emit(
            EventKind::Plan,
            json!({
                "iteration": self.state.iteration,
                "query": query,
                "feedback": self.feedback,
                "memories": memories.iter().map(|m| json!({"id": m.id, "text": m.text})).collect::<Vec<_>>(),
                "steps": plan.steps,
            }),
        );
        self.state.plan = Some(plan);
        self.state.phase = Phase::Acting;
        Ok(())
    }

    fn act(&mut self) -> Result<(), AgentError> {
        let plan = self.state.plan.clone().unwrap_or_else(|| Plan::single(&self.state.working_query));
        let execution = {
            let memory = self.deps.memory.read().unwrap();
            let ctx = ActorContext {
                model: self.model(),
                metadata: &self.metadata,
                memory: &memory,
                retrieval: retrieval(self.state.config.n_semantic),
                today: self.today,
            };
            planner::execute_plan(&self.deps.table, &plan, &ctx)?
        };
        for (i, step) in execution.compiled.iter().enumerate() {
            let mut payload = serde_json::to_value(step).expect("compiled step serializes");
            payload["iteration"] = json!(self.state.iteration);
            payload["index"] = json!(i + 1);
            self.emit(EventKind::CompiledStep, payload);
        }
        let ids = execution.audience.audience_ids();
        self.emit(
            EventKind::AudienceSummary,
            json!({
                "iteration": self.state.iteration,
                "size": ids.len(),
                "pool_size": self.deps.table.row_count(),
                "sample_ids": ids.iter().take(10).collect::<Vec<_>>(),
            }),
        );
        self.history.push(ids.clone());
        self.state.audience_ids = ids;
        self.audience = Some(execution.audience);
        if self.state.config.verify {
            self.state.phase = Phase::Verifying;
        } else {
            self.finish(Status::Success);
        }
        Ok(())
    }

    fn verify(&mut self) -> Result<(), AgentError> {
        let model = ModelHandle::new(self.deps.llm.as_ref(), &self.state.config.model_id);
        let rules = self.cache.rules_for(&self.state.working_query, model)?;
        let mut compiled: Vec<CompiledRule> = Vec::with_capacity(rules.len());
        for rule in &rules {
            let memories = self.deps.memory.read().unwrap().retrieve(
                MemoryKind::Semantic,
                rule,
                &retrieval(self.state.config.n_semantic),
            );
            compiled.push(self.cache.compiled_for(rule, &self.deps.table, &self.metadata, &memories, model)?);
        }
        let audience = self.audience();
        let report = verifier::verify(&audience, &compiled, self.today);
        self.emit(
            EventKind::RuleResult,
            json!({
                "iteration": self.state.iteration,
                "all_passed": report.all_passed,
                "audience_size": report.audience_size,
                "rules": report.rules,
            }),
        );
        let passed = report.all_passed;
        self.rules = rules;
        self.state.report = Some(report);
        if passed {
            self.finish(Status::Success);
        } else if self.state.config.approval_mode == ApprovalMode::Interactive {
            self.state.phase = Phase::AwaitingDecision;
        } else {
            self.state.phase = Phase::Reflecting;
        }
        Ok(())
    }

    fn reflect(&mut self) -> Result<(), AgentError> {
        let report = self.state.report.clone().expect("reflecting follows verification");
        let failed: Vec<&VerificationRule> = report.failures().collect();
        if !self.state.config.reflect {
            self.feedback = reflector::feedback_text(&failed, &[]);
            self.next_iteration();
            return Ok(());
        }
        let memories = reflector::retrieve_solutions(
            &failed,
            &self.deps.memory.read().unwrap(),
            &retrieval(self.state.config.n_episodic),
        );
        let plan = self.state.plan.clone().unwrap_or_else(|| Plan::single(&self.state.working_query));
        let model = ModelHandle::new(self.deps.llm.as_ref(), &self.state.config.model_id);
        let cache = &mut self.cache;
        let mut extract = |q: &str| cache.rules_for(q, model);
        let reflection = reflector::reflect(
            &self.state.working_query,
            &plan,
            &report,
            &memories,
            &self.rules,
            &mut extract,
            model,
        )?;
        self.emit(
            EventKind::Reflection,
            json!({
                "iteration": self.state.iteration,
                "suggestions": reflection.suggestions,
                "rejected_suggestions": reflection.rejected_suggestions,
                "updated_query": reflection.updated_query,
                "proposed_query": reflection.proposed_query,
                "query_violation": reflection.query_violation,
                "insights": reflection.insights,
                "retrieved_memories": reflection.retrieved_memories,
            }),
        );
        let ids = reflector::record_insights(
            &reflection,
            &mut self.deps.memory.write().unwrap(),
            self.state.config.self_learning,
        )?;
        if !ids.is_empty() {
            self.emit(
                EventKind::Insight,
                json!({"iteration": self.state.iteration, "memory_ids": ids, "texts": reflection.insights}),
            );
        }
        let no_suggestions = reflection.suggestions.is_empty();
        self.feedback = reflection.suggestions.join("\n");
        self.state.working_query = reflection.updated_query.clone();
        self.reflection = Some(reflection);
        if no_suggestions {
            self.finish(Status::NoChange);
        } else {
            self.next_iteration();
        }
        Ok(())
    }
}
