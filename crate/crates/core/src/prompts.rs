//! Prompt templates and slot rendering.
//!
//! Templates live under `prompts/` as plain text. Slots are written
//! `{name}` and are filled in a single left-to-right pass, so text pasted
//! into one slot is never re-expanded.

use crate::memory::MemoryItem;

/// Bumped whenever any template text changes; recorded transcripts carry
/// prompt digests, so a change here invalidates them.
pub const PROMPT_VERSION: &str = "1";

pub const PLANNER_SYSTEM: &str = include_str!("../prompts/planner_system.txt");
pub const PLANNER_USER: &str = include_str!("../prompts/planner_user.txt");
pub const ACTOR_SYSTEM: &str = include_str!("../prompts/actor_system.txt");
pub const ACTOR_USER: &str = include_str!("../prompts/actor_user.txt");
pub const VERIFIER_EXTRACT: &str = include_str!("../prompts/verifier_extract.txt");
pub const VERIFIER_COMPILE: &str = include_str!("../prompts/verifier_compile.txt");
pub const REFLECTOR_SYSTEM: &str = include_str!("../prompts/reflector_system.txt");
pub const REFLECTOR_USER: &str = include_str!("../prompts/reflector_user.txt");
pub const DSL_REFERENCE: &str = include_str!("../prompts/dsl_reference.txt");

/// Fill `{key}` slots. Braces that do not name a known slot are copied through.
pub fn render(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            slots
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// The planner's `{memory_prompt}` block; empty when nothing was retrieved.
pub fn memory_prompt(memories: &[MemoryItem]) -> String {
    if memories.is_empty() {
        return String::new();
    }
    let mut s = String::from("Facts from memory:");
    for m in memories {
        s.push_str("\n- ");
        s.push_str(&m.text);
    }
    s
}

/// Inline list for the `Relevant Facts:` slots.
pub fn facts_list(memories: &[MemoryItem]) -> String {
    if memories.is_empty() {
        return "none".into();
    }
    memories
        .iter()
        .map(|m| format!("\n- {}", m.text))
        .collect()
}

pub fn planner_user(query: &str, metadata: &str, feedback: &str, memories: &[MemoryItem]) -> String {
    render(
        PLANNER_USER,
        &[
            ("user_query", query),
            ("metadata", metadata),
            ("critiquer_feedback", feedback),
            ("memory_prompt", &memory_prompt(memories)),
        ],
    )
}

pub fn actor_user(step: &str, metadata: &str, memories: &[MemoryItem]) -> String {
    render(
        ACTOR_USER,
        &[
            ("metadata", metadata),
            ("memory", &facts_list(memories)),
            ("dsl_reference", DSL_REFERENCE.trim_end()),
            ("step", step),
        ],
    )
}

pub fn verifier_extract(query: &str) -> String {
    render(VERIFIER_EXTRACT, &[("user_prompt", query)])
}

pub fn verifier_compile(rule: &str, metadata: &str, memories: &[MemoryItem]) -> String {
    render(
        VERIFIER_COMPILE,
        &[
            ("metadata", metadata),
            ("memory", &facts_list(memories)),
            ("rule", rule),
            ("dsl_reference", DSL_REFERENCE.trim_end()),
        ],
    )
}

pub fn reflector_user(query: &str, plan: &str, feedback: &str) -> String {
    render(
        REFLECTOR_USER,
        &[("user_query", query), ("plan", plan), ("feedback", feedback)],
    )
}

/// Appended to a prompt when the previous answer failed to compile.
pub fn retry_suffix(previous: &str, error: &str) -> String {
    format!(
        "\n\nYour previous answer was:\n{previous}\nIt was rejected with this error: {error}\nReturn a corrected answer only."
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{MemoryKind, MemorySource};
    use chrono::{TimeZone, Utc};

    fn item(text: &str) -> MemoryItem {
        MemoryItem {
            id: "m1".into(),
            kind: MemoryKind::Semantic,
            text: text.into(),
            source: MemorySource::Human,
            created_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn render_is_single_pass() {
        let out = render("a {x} b {y} {z}", &[("x", "{y}"), ("y", "2")]);
        assert_eq!(out, "a {y} b 2 {z}");
        assert_eq!(render("{", &[]), "{");
        assert_eq!(render("}{x", &[("x", "1")]), "}{x");
    }

    #[test]
    fn planner_prompt_slots() {
        let p = planner_user("users below 30 years old", "- age (number)", "", &[]);
        assert!(p.contains("User Query: users below 30 years old\n"));
        assert!(p.contains("Critiquer Feedback: \n\n\n\nResponse Format:"));
        assert!(!p.contains('{'));
        assert!(p.ends_with("[PLANNER OUTPUT]\n\nPlan: \n"));
    }

    #[test]
    fn zero_memories_only_empties_the_memory_block() {
        let with = planner_user("q", "meta", "fb", &[item("state means mailing state")]);
        let without = planner_user("q", "meta", "fb", &[]);
        let block = memory_prompt(&[item("state means mailing state")]);
        assert_eq!(with.replacen(&block, "", 1), without);
    }

    #[test]
    fn every_template_slot_is_filled() {
        let m = [item("f")];
        for p in [
            actor_user("s", "meta", &m),
            verifier_extract("q"),
            verifier_compile("r", "meta", &m),
            reflector_user("q", "p", "f"),
        ] {
            assert!(!p.contains("{metadata}") && !p.contains("{memory}") && !p.contains("{rule}"));
            assert!(!p.contains("{user_prompt}") && !p.contains("{feedback}") && !p.contains("{step}"));
        }
    }
}
