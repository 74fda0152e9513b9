//! Model gateway: every agent call goes through an [`LlmProvider`].
//!
//! Two providers ship here. [`LiveProvider`] speaks the OpenAI-compatible
//! chat-completions wire format with bounded retries. [`ScriptedProvider`]
//! replays a recorded transcript keyed by `(agent_tag, call_index)`, which
//! makes every agent deterministic in tests and benchmarks.
//! [`RecordingProvider`] wraps any provider and writes such a transcript.

mod live;
mod scripted;

pub use live::{LiveConfig, LiveProvider};
pub use scripted::{load_transcript, RecordingProvider, ScriptedProvider, TranscriptEntry};

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentTag {
    Planner,
    Actor,
    VerifierExtract,
    VerifierCompile,
    Reflector,
}

impl AgentTag {
    pub const ALL: [AgentTag; 5] = [
        AgentTag::Planner,
        AgentTag::Actor,
        AgentTag::VerifierExtract,
        AgentTag::VerifierCompile,
        AgentTag::Reflector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentTag::Planner => "planner",
            AgentTag::Actor => "actor",
            AgentTag::VerifierExtract => "verifier_extract",
            AgentTag::VerifierCompile => "verifier_compile",
            AgentTag::Reflector => "reflector",
        }
    }
}

impl fmt::Display for AgentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub agent_tag: AgentTag,
    pub system: String,
    pub user: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub model_id: String,
}

impl ChatRequest {
    /// A request at temperature zero with the provider's default model.
    pub fn new(agent_tag: AgentTag, system: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            agent_tag,
            system: system.into(),
            user: user.into(),
            temperature: 0.0,
            model_id: String::new(),
        }
    }

    pub fn with_model(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    /// Hex SHA-256 of `system + "\n\n" + user`.
    pub fn prompt_digest(&self) -> String {
        prompt_digest(&self.system, &self.user)
    }
}

pub fn prompt_digest(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update(system.as_bytes());
    h.update(b"\n\n");
    h.update(user.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Live,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub token_usage: Option<TokenUsage>,
    pub provider: ProviderKind,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("scripted transcript exhausted for `{tag}` at call {index}")]
    TranscriptExhausted { tag: AgentTag, index: usize },
    #[error("prompt digest mismatch for `{tag}` call {index}: recorded {expected}, got {actual}")]
    DigestMismatch {
        tag: AgentTag,
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("model endpoint returned {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: Box<LlmError> },
    #[error("malformed model response: {0}")]
    InvalidResponse(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed transcript at line {line}: {message}")]
    Transcript { line: usize, message: String },
}

impl LlmError {
    /// Rate limits, server errors and transport failures are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Http { status, .. } => *status == 429 || (500..600).contains(status),
            LlmError::Transport(_) => true,
            _ => false,
        }
    }
}

/// The single chokepoint for model calls.
pub trait LlmProvider: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for std::sync::Arc<P> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(req)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(req)
    }
}
