//! Planner and actor: natural-language plan, then one DSL action per step.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agent::{list_item, strip_fences, AgentError, CompileAttempt, ModelHandle};
use crate::dsl::{apply_action, bind_action, parse_action, BoundAction};
use crate::llm::AgentTag;
use crate::memory::{MemoryItem, MemoryKind, MemoryStore, RetrievalConfig};
use crate::prompts;
use crate::table::{CustomerTable, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    pub raw_output: String,
}

impl Plan {
    /// A plan whose only step is the query itself (planner disabled).
    pub fn single(step: &str) -> Self {
        Plan {
            steps: vec![step.to_string()],
            raw_output: String::new(),
        }
    }

    /// Numbered rendering used in the reflector prompt.
    pub fn numbered(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompiledStep {
    pub step_text: String,
    pub dsl_source: String,
    /// True when the first model output was rejected and the retry succeeded.
    pub retried: bool,
    pub rows_before: usize,
    pub rows_after: usize,
    #[serde(skip)]
    pub action: BoundAction,
}

/// Read the list items that follow the `Plan:` marker.
pub fn parse_plan(raw: &str) -> Result<Plan, AgentError> {
    let unparseable = |message: &str| AgentError::Unparseable {
        agent: AgentTag::Planner,
        message: message.into(),
        raw: raw.to_string(),
    };
    let start = raw.find("Plan:").ok_or_else(|| unparseable("no `Plan:` marker"))?;
    let body = &raw[start + "Plan:".len()..];
    let steps: Vec<String> = body
        .lines()
        .filter_map(list_item)
        .map(str::to_string)
        .collect();
    if steps.is_empty() {
        return Err(unparseable("no steps after `Plan:`"));
    }
    Ok(Plan {
        steps,
        raw_output: raw.to_string(),
    })
}

pub fn make_plan(
    query: &str,
    metadata: &str,
    feedback: &str,
    memories: &[MemoryItem],
    model: ModelHandle<'_>,
) -> Result<Plan, AgentError> {
    let user = prompts::planner_user(query, metadata, feedback, memories);
    let raw = model.ask(AgentTag::Planner, prompts::PLANNER_SYSTEM, &user)?;
    parse_plan(&raw)
}

fn try_compile(output: &str, schema: &Schema) -> Result<(String, BoundAction), String> {
    let src = strip_fences(output);
    let action = parse_action(src).map_err(|e| e.to_string())?;
    let bound = bind_action(&action, schema).map_err(|e| e.to_string())?;
    Ok((action.to_string(), bound))
}

/// Compile one step to a bound action, retrying once with the error fed back.
/// `index` is only used to label errors.
pub fn compile_step(
    index: usize,
    step_text: &str,
    table: &CustomerTable,
    metadata: &str,
    memories: &[MemoryItem],
    model: ModelHandle<'_>,
) -> Result<CompiledStep, AgentError> {
    let user = prompts::actor_user(step_text, metadata, memories);
    let mut attempts = Vec::new();
    for attempt in 0..2 {
        let prompt = match attempts.last() {
            None => user.clone(),
            Some(CompileAttempt { output, error }) => {
                format!("{user}{}", prompts::retry_suffix(output, error))
            }
        };
        let output = model.ask(AgentTag::Actor, prompts::ACTOR_SYSTEM, &prompt)?;
        match try_compile(&output, table.schema()) {
            Ok((dsl_source, action)) => {
                return Ok(CompiledStep {
                    step_text: step_text.to_string(),
                    dsl_source,
                    retried: attempt > 0,
                    rows_before: 0,
                    rows_after: 0,
                    action,
                })
            }
            Err(error) => attempts.push(CompileAttempt { output, error }),
        }
    }
    Err(AgentError::Compile {
        index,
        step: step_text.to_string(),
        attempts,
    })
}

/// Inputs the actor needs besides the plan.
pub struct ActorContext<'a> {
    pub model: ModelHandle<'a>,
    pub metadata: &'a str,
    pub memory: &'a MemoryStore,
    pub retrieval: RetrievalConfig,
    pub today: NaiveDate,
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub audience: CustomerTable,
    pub compiled: Vec<CompiledStep>,
}

/// Apply bound actions in order, recording row counts.
pub fn apply_steps(table: &CustomerTable, steps: &mut [CompiledStep], today: NaiveDate) -> CustomerTable {
    let mut current = table.clone();
    for step in steps {
        step.rows_before = current.row_count();
        current = apply_action(&current, &step.action, today);
        step.rows_after = current.row_count();
    }
    current
}

/// Compile every step, then run them in succession over `table`.
pub fn execute_plan(table: &CustomerTable, plan: &Plan, ctx: &ActorContext<'_>) -> Result<Execution, AgentError> {
    if plan.steps.is_empty() {
        return Err(AgentError::EmptyPlan);
    }
    let mut compiled = Vec::with_capacity(plan.steps.len());
    for (i, step) in plan.steps.iter().enumerate() {
        let memories = ctx.memory.retrieve(MemoryKind::Semantic, step, &ctx.retrieval);
        compiled.push(compile_step(i + 1, step, table, ctx.metadata, &memories, ctx.model)?);
    }
    let audience = apply_steps(table, &mut compiled, ctx.today);
    Ok(Execution { audience, compiled })
}
