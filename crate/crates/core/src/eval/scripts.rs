//! Scripted model responses for the synthetic benchmark.
//!
//! Each builder writes the exact call sequence a session makes for one case,
//! so a [`ScriptedProvider`] can stand in for the model.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::llm::{load_transcript, AgentTag, LlmError, ScriptedProvider, TranscriptEntry};

use super::synth::{ChallengeCase, ChallengeKind, Cond, SynthCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptArm {
    /// Correct plans: one step per criterion.
    WithMemory,
    /// Like `with_memory`, but the planner also filters residence through
    /// `web_destinations` whenever that changes the audience.
    NoMemory,
    /// Planner and verifier off: the actor sees the whole query.
    ActorOnly,
}

impl ScriptArm {
    pub const ALL: [ScriptArm; 3] = [ScriptArm::WithMemory, ScriptArm::NoMemory, ScriptArm::ActorOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            ScriptArm::WithMemory => "with_memory",
            ScriptArm::NoMemory => "no_memory",
            ScriptArm::ActorOnly => "actor_only",
        }
    }
}

impl std::str::FromStr for ScriptArm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScriptArm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown script arm `{s}`"))
    }
}

/// Accumulates per-tag responses for one query.
struct Script {
    query_id: String,
    by_tag: BTreeMap<AgentTag, Vec<String>>,
}

impl Script {
    fn new(query_id: &str) -> Self {
        Script {
            query_id: query_id.to_string(),
            by_tag: BTreeMap::new(),
        }
    }

    fn push(&mut self, tag: AgentTag, text: impl Into<String>) {
        self.by_tag.entry(tag).or_default().push(text.into());
    }

    fn entries(self) -> Vec<TranscriptEntry> {
        let qid = self.query_id;
        self.by_tag
            .into_iter()
            .flat_map(|(tag, texts)| {
                let qid = qid.clone();
                texts.into_iter().enumerate().map(move |(i, text)| TranscriptEntry {
                    query_id: Some(qid.clone()),
                    ..TranscriptEntry::new(tag, i, text)
                })
            })
            .collect()
    }
}

fn plan_text(steps: &[String]) -> String {
    let mut s = String::from("[PLANNER OUTPUT]\n\nPlan:");
    for (i, step) in steps.iter().enumerate() {
        s.push_str(&format!("\n{}. {step}", i + 1));
    }
    s
}

fn rules_text(rules: &[String], today_line: Option<&str>) -> String {
    let mut lines: Vec<String> = rules.iter().enumerate().map(|(i, r)| format!("{}. {r}", i + 1)).collect();
    if let Some(t) = today_line {
        lines.push(format!("{}. {t}", lines.len() + 1));
    }
    lines.join("\n")
}

fn today_line(query: &str) -> Option<&str> {
    query.find("Assume today").map(|i| query[i..].trim())
}

/// Script for one filter case under `arm`.
pub fn case_script(case: &SynthCase, arm: ScriptArm) -> Vec<TranscriptEntry> {
    let mut s = Script::new(&case.case.query_id);
    if arm == ScriptArm::ActorOnly {
        let conj: Vec<String> = case.conds.iter().map(Cond::dsl).collect();
        s.push(AgentTag::Actor, conj.join(" and "));
        return s.entries();
    }
    let mut steps: Vec<&Cond> = case.conds.iter().collect();
    if arm == ScriptArm::NoMemory {
        if let Some(d) = &case.distractor {
            let at = steps.iter().position(|c| c.column() == "state").map_or(steps.len(), |p| p + 1);
            steps.insert(at, d);
        }
    }
    s.push(
        AgentTag::Planner,
        plan_text(&steps.iter().map(|c| c.step()).collect::<Vec<_>>()),
    );
    for c in &steps {
        s.push(AgentTag::Actor, c.dsl());
    }
    let rules: Vec<String> = case.conds.iter().map(Cond::rule).collect();
    s.push(AgentTag::VerifierExtract, rules_text(&rules, today_line(&case.case.query)));
    for c in &case.conds {
        s.push(AgentTag::VerifierCompile, format!("all({})", c.dsl()));
    }
    s.entries()
}

fn reflection(suggestion: &str, query: &str, insight: &str) -> String {
    format!("Suggested Changes:\n- {suggestion}\nUpdated User Query: {query}\nDistilled Insights:\n- {insight}")
}

/// Script for a challenge case: the literal criteria fail the size rule and
/// each reflection relaxes the varying criterion one notch.
pub fn challenge_script(c: &ChallengeCase) -> Vec<TranscriptEntry> {
    let mut s = Script::new(&c.case.query_id);
    for attempt in &c.attempts {
        let steps: Vec<String> = c.kept.iter().chain([attempt]).map(Cond::step).collect();
        s.push(AgentTag::Planner, plan_text(&steps));
        for cond in c.kept.iter().chain([attempt]) {
            s.push(AgentTag::Actor, cond.dsl());
        }
    }

    let today = today_line(&c.case.query);
    let kept_rules: Vec<String> = c.kept.iter().map(Cond::rule).collect();
    let mut initial = vec![c.size_rule()];
    initial.extend(kept_rules.iter().cloned());
    initial.push(c.attempts[0].rule());
    s.push(AgentTag::VerifierExtract, rules_text(&initial, today));
    let mut dropped = vec![c.size_rule()];
    dropped.extend(kept_rules);
    s.push(AgentTag::VerifierExtract, rules_text(&dropped, today));

    s.push(AgentTag::VerifierCompile, format!("count >= {}", c.size));
    for cond in c.kept.iter().chain([&c.attempts[0]]) {
        s.push(AgentTag::VerifierCompile, format!("all({})", cond.dsl()));
    }

    let q = &c.dropped_query;
    match c.kind {
        ChallengeKind::Threshold => {
            s.push(
                AgentTag::Reflector,
                reflection(
                    "Consider lowering the propensity threshold so the audience reaches the requested size.",
                    q,
                    "When a high propensity threshold leaves the audience too small, lower the threshold rather than dropping other criteria.",
                ),
            );
            s.push(
                AgentTag::Reflector,
                reflection(
                    "You may try lowering the propensity threshold further.",
                    q,
                    "Relax thresholds in larger steps when the audience is far below the requested size.",
                ),
            );
        }
        ChallengeKind::Keyword => s.push(
            AgentTag::Reflector,
            reflection(
                "Consider matching the page name \"Financial Services\" instead of \"Finance\".",
                q,
                "The Finance page is listed as Financial Services in pages_visited.",
            ),
        ),
    }
    s.entries()
}

/// Scripts for many queries, grouped by `query_id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptBook {
    by_query: BTreeMap<String, Vec<TranscriptEntry>>,
}

impl ScriptBook {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut book = ScriptBook::default();
        for e in entries {
            let key = e.query_id.clone().unwrap_or_default();
            book.by_query.entry(key).or_default().push(e);
        }
        book
    }

    pub fn for_cases(cases: &[SynthCase], arm: ScriptArm) -> Self {
        Self::from_entries(cases.iter().flat_map(|c| case_script(c, arm)))
    }

    pub fn for_challenges(cases: &[ChallengeCase]) -> Self {
        Self::from_entries(cases.iter().flat_map(challenge_script))
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::from_entries(load_transcript(path)?))
    }

    pub fn entries(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.by_query.values().flatten()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries()
            .map(|e| serde_json::to_string(e).expect("serializable") + "\n")
            .collect()
    }

    pub fn contains(&self, query_id: &str) -> bool {
        self.by_query.contains_key(query_id)
    }

    /// A fresh provider replaying the script for `query_id` (empty if unknown).
    pub fn provider(&self, query_id: &str) -> ScriptedProvider {
        ScriptedProvider::new(self.by_query.get(query_id).cloned().unwrap_or_default())
    }
}
