//! Closed, typed filter language used by the actor and the verifier.

mod ast;
mod bind;
mod eval;
mod parser;

pub use ast::{Action, CompareOp, Direction, FilterExpr, LimitClause, Literal, Predicate};
pub use bind::{bind, bind_action, bind_limit, bind_predicate, BoundAction, BoundLimit, TypedExpr, TypedPredicate};
pub use eval::{apply_action, apply_filter, apply_limit, eval_predicate, PredicateOutcome};
pub use parser::{parse_action, parse_filter, parse_predicate};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at position {position}: {message}")]
    Parse { message: String, position: usize },
    #[error("unknown column `{column}`; valid columns are: {}", valid.join(", "))]
    UnknownColumn { column: String, valid: Vec<String> },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

impl DslError {
    pub(crate) fn parse(message: impl Into<String>, position: usize) -> Self {
        DslError::Parse {
            message: message.into(),
            position,
        }
    }
}
