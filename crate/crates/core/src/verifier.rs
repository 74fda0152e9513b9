//! Verifier: extract objective criteria from the query, compile each to an
//! aggregate predicate, and evaluate them against the audience.

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agent::{list_items, strip_fences, AgentError, CompileAttempt, ModelHandle};
use crate::dsl::{bind_predicate, eval_predicate, parse_predicate, TypedPredicate};
use crate::llm::AgentTag;
use crate::memory::MemoryItem;
use crate::prompts;
use crate::table::CustomerTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleResult {
    Pass,
    Fail,
    NotCompiled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRule {
    pub rule_text: String,
    /// Canonical predicate source; `None` when the rule did not compile.
    pub predicate: Option<String>,
    pub result: RuleResult,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub rules: Vec<VerificationRule>,
    pub all_passed: bool,
    pub audience_size: usize,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &VerificationRule> {
        self.rules.iter().filter(|r| r.result != RuleResult::Pass)
    }
}

/// A rule together with its compiled predicate, or the reason it has none.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledRule {
    pub rule_text: String,
    pub program: Result<TypedPredicate, Vec<CompileAttempt>>,
}

impl CompiledRule {
    pub fn predicate_source(&self) -> Option<String> {
        self.program.as_ref().ok().map(|p| p.source().to_string())
    }
}

const NO_RULES: [&str; 4] = ["none", "n/a", "no verifiable statements", "there are no verifiable statements"];

/// Parse the extraction response into rule texts.
pub fn parse_rules(raw: &str) -> Result<Vec<String>, AgentError> {
    let items = list_items(raw);
    if items.is_empty() {
        let t = raw.trim().trim_end_matches('.').to_ascii_lowercase();
        if t.is_empty() || NO_RULES.contains(&t.as_str()) {
            return Ok(Vec::new());
        }
        return Err(AgentError::Unparseable {
            agent: AgentTag::VerifierExtract,
            message: "expected a list of statements".into(),
            raw: raw.to_string(),
        });
    }
    Ok(items
        .into_iter()
        .map(|s| s.trim_matches('"').trim().to_string())
        .filter(|s| !s.is_empty() && !s.contains("Assume today"))
        .collect())
}

pub fn extract_rules(query: &str, model: ModelHandle<'_>) -> Result<Vec<String>, AgentError> {
    let raw = model.ask(AgentTag::VerifierExtract, "", &prompts::verifier_extract(query))?;
    parse_rules(&raw)
}

/// Form used to compare rule sets: lowercase, single spaces, no trailing period.
pub fn normalize_rule(rule: &str) -> String {
    rule.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches('.')
        .to_lowercase()
}

/// Compile one rule, retrying once with the error fed back. Failure is not
/// an error: the rule is kept and reported as `not_compiled`.
pub fn compile_rule(
    rule_text: &str,
    table: &CustomerTable,
    metadata: &str,
    memories: &[MemoryItem],
    model: ModelHandle<'_>,
) -> Result<CompiledRule, AgentError> {
    let user = prompts::verifier_compile(rule_text, metadata, memories);
    let mut attempts: Vec<CompileAttempt> = Vec::new();
    for _ in 0..2 {
        let prompt = match attempts.last() {
            None => user.clone(),
            Some(a) => format!("{user}{}", prompts::retry_suffix(&a.output, &a.error)),
        };
        let output = model.ask(AgentTag::VerifierCompile, "", &prompt)?;
        let compiled = parse_predicate(strip_fences(&output))
            .and_then(|p| bind_predicate(&p, table.schema()));
        match compiled {
            Ok(predicate) => {
                return Ok(CompiledRule {
                    rule_text: rule_text.to_string(),
                    program: Ok(predicate),
                })
            }
            Err(e) => attempts.push(CompileAttempt {
                output,
                error: e.to_string(),
            }),
        }
    }
    Ok(CompiledRule {
        rule_text: rule_text.to_string(),
        program: Err(attempts),
    })
}

/// Evaluate every rule. Rules that did not compile count as failures.
pub fn verify(audience: &CustomerTable, rules: &[CompiledRule], today: NaiveDate) -> VerificationReport {
    let rules: Vec<VerificationRule> = rules
        .iter()
        .map(|rule| match &rule.program {
            Ok(pred) => {
                let outcome = eval_predicate(audience, pred, today);
                VerificationRule {
                    rule_text: rule.rule_text.clone(),
                    predicate: Some(pred.source().to_string()),
                    result: if outcome.passed { RuleResult::Pass } else { RuleResult::Fail },
                    detail: outcome.detail,
                }
            }
            Err(attempts) => VerificationRule {
                rule_text: rule.rule_text.clone(),
                predicate: None,
                result: RuleResult::NotCompiled,
                detail: match attempts.last() {
                    Some(a) => format!("could not compile: {}", a.error),
                    None => "could not compile".into(),
                },
            },
        })
        .collect();
    VerificationReport {
        all_passed: rules.iter().all(|r| r.result == RuleResult::Pass),
        audience_size: audience.row_count(),
        rules,
    }
}

/// Per-session memo of extraction and compilation results, keyed by the
/// exact query or rule text.
#[derive(Debug, Default, Clone)]
pub struct RuleCache {
    extracted: HashMap<String, Vec<String>>,
    compiled: HashMap<String, CompiledRule>,
}

impl RuleCache {
    pub fn rules_for(&mut self, query: &str, model: ModelHandle<'_>) -> Result<Vec<String>, AgentError> {
        if let Some(rules) = self.extracted.get(query) {
            return Ok(rules.clone());
        }
        let rules = extract_rules(query, model)?;
        self.extracted.insert(query.to_string(), rules.clone());
        Ok(rules)
    }

    pub fn compiled_for(
        &mut self,
        rule_text: &str,
        table: &CustomerTable,
        metadata: &str,
        memories: &[MemoryItem],
        model: ModelHandle<'_>,
    ) -> Result<CompiledRule, AgentError> {
        if let Some(c) = self.compiled.get(rule_text) {
            return Ok(c.clone());
        }
        let c = compile_rule(rule_text, table, metadata, memories, model)?;
        self.compiled.insert(rule_text.to_string(), c.clone());
        Ok(c)
    }
}
