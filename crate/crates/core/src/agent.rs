//! Plumbing shared by the planner, actor, verifier and reflector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{AgentTag, ChatRequest, LlmError, LlmProvider};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{agent} response could not be parsed: {message}")]
    Unparseable {
        agent: AgentTag,
        message: String,
        raw: String,
    },
    #[error("step {index} (`{step}`) did not compile: {}", describe_attempts(.attempts))]
    Compile {
        index: usize,
        step: String,
        attempts: Vec<CompileAttempt>,
    },
    #[error("plan has no steps")]
    EmptyPlan,
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
}

/// One model output and the reason it was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileAttempt {
    pub output: String,
    pub error: String,
}

fn describe_attempts(attempts: &[CompileAttempt]) -> String {
    attempts
        .iter()
        .map(|a| format!("`{}` ({})", a.output, a.error))
        .collect::<Vec<_>>()
        .join("; then ")
}

/// Everything an agent needs to reach the model.
#[derive(Clone, Copy)]
pub struct ModelHandle<'a> {
    pub llm: &'a dyn LlmProvider,
    pub model_id: &'a str,
}

impl<'a> ModelHandle<'a> {
    pub fn new(llm: &'a dyn LlmProvider, model_id: &'a str) -> Self {
        ModelHandle { llm, model_id }
    }

    pub fn ask(&self, tag: AgentTag, system: &str, user: &str) -> Result<String, LlmError> {
        let req = ChatRequest::new(tag, system, user).with_model(self.model_id);
        Ok(self.llm.complete(&req)?.text)
    }
}

/// Strip a surrounding Markdown code fence, if any.
pub fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(body) = t.strip_prefix("```") else {
        return t;
    };
    let body = match body.find('\n') {
        Some(nl) => &body[nl + 1..],
        None => body,
    };
    body.strip_suffix("```").unwrap_or(body).trim()
}

/// The text of a list item (`1.`, `1)`, `-`, `*`, `•`), or `None` for other lines.
pub fn list_item(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let rest = if let Some(r) = t.strip_prefix(['-', '*', '•']) {
        r
    } else {
        let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        if digits == 0 {
            return None;
        }
        t[digits..].strip_prefix(['.', ')'])?
    };
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let item = rest.trim().trim_matches('*').trim();
    (!item.is_empty()).then_some(item)
}

/// All list items in `text`, in order.
pub fn list_items(text: &str) -> Vec<String> {
    text.lines().filter_map(list_item).map(str::to_string).collect()
}
