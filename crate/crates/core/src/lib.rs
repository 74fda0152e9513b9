//! Plan, act, verify and reflect over a customer table.
//!
//! [`Session`] drives one query through the loop; the agents talk to the
//! model through an [`LlmProvider`], filter the table with the [`dsl`] and
//! read from a BM25-ranked [`MemoryStore`]. [`eval`] holds the benchmark
//! harness.

pub mod dsl;
pub mod table;
pub mod memory;
pub mod llm;
pub mod prompts;
pub mod agent;
pub mod planner;
pub mod verifier;
pub mod reflector;
pub mod orchestrator;
pub mod eval;

pub use llm::{AgentTag, LiveConfig, LiveProvider, LlmProvider, ScriptedProvider};
pub use memory::{MemoryItem, MemoryKind, MemorySource, MemoryStore, RetrievalConfig};
pub use orchestrator::{
    ApprovalMode, Decision, Phase, Session, SessionConfig, SessionDeps, SessionError, SessionState, Status,
};
pub use table::{CustomerTable, Schema, SchemaSidecar};
