//! Reflector: turns failed rules into suggestions, a possibly narrowed query,
//! and distilled insights.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::agent::{list_item, AgentError, ModelHandle};
use crate::llm::AgentTag;
use crate::memory::{MemoryError, MemoryKind, MemorySource, MemoryStore, RetrievalConfig, ScoredMemory};
use crate::planner::Plan;
use crate::prompts;
use crate::verifier::{normalize_rule, VerificationReport, VerificationRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedMemory {
    pub id: String,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub suggestions: Vec<String>,
    /// Suggestions dropped for not opening with "Consider" or "You may try".
    pub rejected_suggestions: Vec<String>,
    /// The query the loop continues with.
    pub updated_query: String,
    /// What the model proposed, when it differs from `updated_query`.
    pub proposed_query: Option<String>,
    /// Why the proposed query was refused.
    pub query_violation: Option<String>,
    pub insights: Vec<String>,
    pub retrieved_memories: Vec<RetrievedMemory>,
    pub raw_output: String,
}

/// Episodic retrieval for each failed rule, merged: duplicates keep their best
/// score, then the top `cfg.n` overall.
pub fn retrieve_solutions(
    failed: &[&VerificationRule],
    store: &MemoryStore,
    cfg: &RetrievalConfig,
) -> Vec<ScoredMemory> {
    let mut merged: Vec<ScoredMemory> = Vec::new();
    for rule in failed {
        for hit in store.retrieve_scored(MemoryKind::Episodic, &rule.rule_text, cfg) {
            match merged.iter_mut().find(|m| m.item.id == hit.item.id) {
                Some(existing) => existing.score = existing.score.max(hit.score),
                None => merged.push(hit),
            }
        }
    }
    merged.sort_by(|a, b| b.score.total_cmp(&a.score));
    merged.truncate(cfg.n);
    merged
}

/// The `{feedback}` slot: failed rules with their details, then the facts.
pub fn feedback_text(failed: &[&VerificationRule], memories: &[ScoredMemory]) -> String {
    let mut s = String::from("Failed test cases:");
    for rule in failed {
        s.push_str(&format!("\n- {} ({})", rule.rule_text, rule.detail));
    }
    s.push_str("\nFacts:");
    if memories.is_empty() {
        s.push_str(" none");
    }
    for m in memories {
        s.push_str("\n- ");
        s.push_str(&m.item.text);
    }
    s
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Suggestions,
    Query,
    Insights,
}

const HEADERS: [(&str, Section); 3] = [
    ("suggested changes", Section::Suggestions),
    ("updated user query", Section::Query),
    ("distilled insights", Section::Insights),
];

/// Recognize a section header; returns the section and any text after the colon.
fn header(line: &str) -> Option<(Section, &str)> {
    let t = line
        .trim()
        .trim_start_matches(|c: char| c == '#' || c == '*' || c.is_whitespace());
    let t = t
        .strip_prefix('(')
        .and_then(|r| r.split_once(')'))
        .map(|(_, r)| r.trim_start())
        .unwrap_or(t);
    let lower = t.to_ascii_lowercase();
    for (name, section) in HEADERS {
        if lower.starts_with(name) {
            let rest = t[name.len()..].trim_start_matches(['*', ':', ' ']);
            let rest = rest.trim_start_matches(['*', ':']).trim();
            return Some((section, rest));
        }
    }
    None
}

struct Parsed {
    suggestions: Vec<String>,
    query: Option<String>,
    insights: Vec<String>,
}

fn entries(lines: &[&str]) -> Vec<String> {
    let items: Vec<String> = lines.iter().filter_map(|l| list_item(l)).map(str::to_string).collect();
    if !items.is_empty() {
        return items;
    }
    lines
        .iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_sections(raw: &str) -> Result<Parsed, AgentError> {
    let mut current: Option<Section> = None;
    let mut buckets: [Vec<&str>; 3] = Default::default();
    let mut seen = [false; 3];
    for line in raw.lines() {
        if let Some((section, rest)) = header(line) {
            current = Some(section);
            seen[section as usize] = true;
            if !rest.is_empty() {
                buckets[section as usize].push(rest);
            }
        } else if let Some(section) = current {
            buckets[section as usize].push(line);
        }
    }
    if !seen[Section::Suggestions as usize] {
        return Err(AgentError::Unparseable {
            agent: AgentTag::Reflector,
            message: "no `Suggested Changes` section".into(),
            raw: raw.to_string(),
        });
    }
    let query = seen[Section::Query as usize].then(|| {
        buckets[Section::Query as usize]
            .iter()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
            .trim_matches('"')
            .trim()
            .to_string()
    });
    Ok(Parsed {
        suggestions: entries(&buckets[Section::Suggestions as usize]),
        query,
        insights: entries(&buckets[Section::Insights as usize]),
    })
}

fn is_advisory(s: &str) -> bool {
    s.starts_with("Consider") || s.starts_with("You may try")
}

/// Accept `proposed` only if every rule it implies is already a rule of the
/// original query. Returns the violation, if any.
pub fn check_drop_only(
    original_query: &str,
    proposed: &str,
    original_rules: &[String],
    extract: &mut dyn FnMut(&str) -> Result<Vec<String>, AgentError>,
) -> Option<String> {
    if normalize_rule(proposed) == normalize_rule(original_query) {
        return None;
    }
    if proposed.trim().is_empty() {
        return Some("updated query is empty".into());
    }
    let allowed: HashSet<String> = original_rules.iter().map(|r| normalize_rule(r)).collect();
    match extract(proposed) {
        Ok(rules) => {
            let added: Vec<String> = rules
                .into_iter()
                .filter(|r| !allowed.contains(&normalize_rule(r)))
                .collect();
            if added.is_empty() {
                None
            } else {
                Some(format!("updated query adds criteria: {}", added.join("; ")))
            }
        }
        Err(e) => Some(format!("could not extract criteria from updated query: {e}")),
    }
}

/// Run the reflector on a failed report. `original_rules` are the rules the
/// report was built from; `extract` re-extracts rules for the drop-only check.
pub fn reflect(
    query: &str,
    plan: &Plan,
    report: &VerificationReport,
    memories: &[ScoredMemory],
    original_rules: &[String],
    extract: &mut dyn FnMut(&str) -> Result<Vec<String>, AgentError>,
    model: ModelHandle<'_>,
) -> Result<Reflection, AgentError> {
    let failed: Vec<&VerificationRule> = report.failures().collect();
    let user = prompts::reflector_user(query, &plan.numbered(), &feedback_text(&failed, memories));
    let raw = model.ask(AgentTag::Reflector, prompts::REFLECTOR_SYSTEM, &user)?;
    let parsed = parse_sections(&raw)?;

    let (suggestions, rejected_suggestions) = parsed.suggestions.into_iter().partition(|s| is_advisory(s));
    let proposed = parsed.query.filter(|q| q != query);
    let query_violation = proposed
        .as_deref()
        .and_then(|p| check_drop_only(query, p, original_rules, extract));
    if let Some(v) = &query_violation {
        log::warn!("reflector query rejected: {v}");
    }
    let updated_query = match (&proposed, &query_violation) {
        (Some(p), None) => p.clone(),
        _ => query.to_string(),
    };
    Ok(Reflection {
        suggestions,
        rejected_suggestions,
        updated_query,
        proposed_query: proposed,
        query_violation,
        insights: parsed.insights,
        retrieved_memories: memories
            .iter()
            .map(|m| RetrievedMemory {
                id: m.item.id.clone(),
                text: m.item.text.clone(),
                score: m.score,
            })
            .collect(),
        raw_output: raw,
    })
}

/// Write insights to semantic memory as self-learned items when enabled.
pub fn record_insights(
    reflection: &Reflection,
    store: &mut MemoryStore,
    enabled: bool,
) -> Result<Vec<String>, MemoryError> {
    if !enabled {
        return Ok(Vec::new());
    }
    reflection
        .insights
        .iter()
        .map(|text| store.add(MemoryKind::Semantic, text, MemorySource::SelfLearned))
        .collect()
}
