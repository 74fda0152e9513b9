use std::collections::HashSet;
use std::sync::{Arc, RwLock};

use chrono::NaiveDate;
use ramp_core::llm::{AgentTag, ScriptedProvider};
use ramp_core::memory::{MemoryKind, MemorySource, MemoryStore};
use ramp_core::orchestrator::{
    ApprovalMode, Decision, EventKind, Phase, Session, SessionConfig, SessionDeps, SessionError, Status,
};
use ramp_core::table::{CustomerTable, SchemaSidecar};

fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 6, 30).unwrap()
}

/// 20 customers; propensity_hotels = 5 * index, alternating NY/MA.
fn table() -> CustomerTable {
    let sidecar: SchemaSidecar = serde_json::from_str(
        r#"{"id_column":"id","columns":[
            {"name":"id","type":"text"},
            {"name":"state","type":"text"},
            {"name":"age","type":"number"},
            {"name":"propensity_hotels","type":"number"}]}"#,
    )
    .unwrap();
    let mut csv = String::from("id,state,age,propensity_hotels\n");
    for i in 0..20 {
        let state = if i % 2 == 0 { "NY" } else { "MA" };
        csv.push_str(&format!("{i},{state},{},{}\n", 20 + i, 5 * i));
    }
    CustomerTable::from_reader(csv.as_bytes(), &sidecar).unwrap()
}

fn deps(llm: ScriptedProvider, memory: MemoryStore) -> SessionDeps {
    SessionDeps {
        table: table(),
        memory: Arc::new(RwLock::new(memory)),
        llm: Arc::new(llm),
    }
}

fn config(max_iterations: usize) -> SessionConfig {
    SessionConfig {
        max_iterations,
        ..SessionConfig::new(today())
    }
}

const REFLECT_LOWER: &str = "Suggested Changes:\n- Consider lowering the propensity threshold.\n\
Updated User Query: Give me at least 6 users with high hotel propensity\n\
Distilled Insights:\n- When the audience is too small, lower the hotel propensity threshold.";

const REFLECT_LOWER_AGAIN: &str = "Suggested Changes:\n- Consider lowering the threshold further.\n\
Updated User Query: Give me at least 6 users with high hotel propensity\n\
Distilled Insights:\n- Lower thresholds in larger steps.";

/// Threshold too high at first; each reflection lowers it.
fn challenge_script() -> ScriptedProvider {
    ScriptedProvider::from_responses([
        (
            AgentTag::Planner,
            vec![
                "[PLANNER OUTPUT]\n\nPlan:\n1. Filter hotel propensity above 90",
                "Plan:\n1. Filter hotel propensity above 80",
                "Plan:\n1. Filter hotel propensity above 65",
            ],
        ),
        (
            AgentTag::Actor,
            vec!["propensity_hotels > 90", "propensity_hotels > 80", "propensity_hotels > 65"],
        ),
        (
            AgentTag::VerifierExtract,
            vec![
                "1. The audience has at least 6 users\n2. Hotel propensity is above 90",
                "1. The audience has at least 6 users",
            ],
        ),
        (AgentTag::VerifierCompile, vec!["count >= 6", "all(propensity_hotels > 90)"]),
        (AgentTag::Reflector, vec![REFLECT_LOWER, REFLECT_LOWER_AGAIN]),
    ])
}

const CHALLENGE_QUERY: &str = "Give me at least 6 users with hotel propensity above 90";

fn kinds(s: &Session) -> Vec<EventKind> {
    s.state().transcript.iter().map(|e| e.kind).collect()
}

#[test]
fn first_pass_success() {
    let llm = ScriptedProvider::from_responses([
        (AgentTag::Planner, vec!["Plan:\n1. Filter state equals NY\n2. Filter age below 30"]),
        (AgentTag::Actor, vec!["state = \"NY\"", "age < 30"]),
        (AgentTag::VerifierExtract, vec!["1. Users live in NY\n2. Users are below 30 years old"]),
        (AgentTag::VerifierCompile, vec!["all(state = \"NY\")", "all(age < 30)"]),
    ]);
    let mut s = Session::start("s1", "NY users below 30 years old", config(3), deps(llm, MemoryStore::new())).unwrap();
    assert_eq!(s.phase(), Phase::Planning);
    s.run_to_completion().unwrap();
    assert_eq!(s.status(), Status::Success);
    assert_eq!(s.state().iteration, 1);
    assert_eq!(s.state().audience_ids, ["0", "2", "4", "6", "8"]);
    assert_eq!(
        kinds(&s),
        [
            EventKind::Plan,
            EventKind::CompiledStep,
            EventKind::CompiledStep,
            EventKind::AudienceSummary,
            EventKind::RuleResult
        ]
    );
    let seqs: Vec<u64> = s.state().transcript.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, [1, 2, 3, 4, 5]);
}

#[test]
fn one_loop_budget() {
    let mut s = Session::start("s", CHALLENGE_QUERY, config(1), deps(challenge_script(), MemoryStore::new())).unwrap();
    s.run_to_completion().unwrap();
    assert_eq!(s.status(), Status::BudgetExhausted);
    assert_eq!(s.state().iteration, 1);
    assert!(kinds(&s).contains(&EventKind::Reflection));
    assert!(s.last_reflection().is_some());
}

#[test]
fn challenge_recall_grows_across_iterations() {
    let mut s = Session::start("s", CHALLENGE_QUERY, config(3), deps(challenge_script(), MemoryStore::new())).unwrap();
    s.run_to_completion().unwrap();
    assert_eq!(s.status(), Status::Success, "{:?}", s.state().error);
    assert_eq!(s.state().iteration, 3);
    let gold: HashSet<String> = (14..20).map(|i| i.to_string()).collect();
    let recall: Vec<f64> = s
        .iteration_audiences()
        .iter()
        .map(|ids| ids.iter().filter(|id| gold.contains(*id)).count() as f64 / gold.len() as f64)
        .collect();
    assert_eq!(recall.len(), 3);
    assert!(recall[0] < recall[1] && recall[1] < recall[2]);
    assert_eq!(recall[2], 1.0);
    assert_eq!(s.state().working_query, "Give me at least 6 users with high hotel propensity");
}

#[test]
fn replay_is_identical() {
    let run = || {
        let mut s = Session::start("s", CHALLENGE_QUERY, config(3), deps(challenge_script(), MemoryStore::new())).unwrap();
        s.run_to_completion().unwrap();
        s.transcript_fingerprint()
    };
    assert_eq!(run(), run());
}

#[test]
fn config_errors() {
    let d = || deps(challenge_script(), MemoryStore::new());
    assert!(matches!(Session::start("s", "q", config(0), d()), Err(SessionError::InvalidConfig(_))));
    let mut c = config(1);
    c.today = None;
    assert!(matches!(Session::start("s", "q", c, d()), Err(SessionError::InvalidConfig(_))));
    let c: Result<SessionConfig, _> = serde_json::from_str(r#"{"max_iterations": 2}"#);
    assert!(c.unwrap().validate().is_err());
}

fn interactive() -> Session {
    let mut c = config(3);
    c.approval_mode = ApprovalMode::Interactive;
    let mut s = Session::start("s", CHALLENGE_QUERY, c, deps(challenge_script(), MemoryStore::new())).unwrap();
    for _ in 0..3 {
        s.step().unwrap();
    }
    assert_eq!(s.phase(), Phase::AwaitingDecision);
    s
}

#[test]
fn interactive_gate() {
    let mut s = interactive();
    assert_eq!(s.step().unwrap_err(), SessionError::WrongPhase { actual: Phase::AwaitingDecision });
    assert_eq!(s.run_to_completion().unwrap_err(), SessionError::NotAuto);
    s.submit_decision(Decision::Proceed).unwrap();
    assert_eq!(s.phase(), Phase::Reflecting);
    s.step().unwrap();
    assert_eq!((s.phase(), s.state().iteration), (Phase::Planning, 2));
    assert_eq!(
        s.submit_decision(Decision::Stop).unwrap_err(),
        SessionError::WrongPhase { actual: Phase::Planning }
    );
}

#[test]
fn interactive_stop_keeps_audience() {
    let mut s = interactive();
    let before = s.state().audience_ids.clone();
    s.submit_decision(Decision::Stop).unwrap();
    assert_eq!((s.phase(), s.status()), (Phase::Done, Status::UserStopped));
    assert_eq!(s.state().audience_ids, before);
    assert_eq!(s.step().unwrap_err(), SessionError::Finished);
}

#[test]
fn interactive_amend() {
    let mut s = interactive();
    s.submit_decision(Decision::Amend { text: "only MA users".into() }).unwrap();
    assert_eq!(s.state().working_query, "only MA users");
    assert_eq!((s.phase(), s.state().iteration), (Phase::Planning, 2));
    assert_eq!(*kinds(&s).last().unwrap(), EventKind::Decision);
}

#[test]
fn zero_suggestions_is_no_change() {
    let llm = ScriptedProvider::from_responses([
        (AgentTag::Planner, vec!["Plan:\n1. Filter hotel propensity above 90"]),
        (AgentTag::Actor, vec!["propensity_hotels > 90"]),
        (AgentTag::VerifierExtract, vec!["1. The audience has at least 6 users"]),
        (AgentTag::VerifierCompile, vec!["count >= 6"]),
        (AgentTag::Reflector, vec!["Suggested Changes:\nUpdated User Query: q\nDistilled Insights:"]),
    ]);
    let mut s = Session::start("s", "q", config(3), deps(llm, MemoryStore::new())).unwrap();
    s.run_to_completion().unwrap();
    assert_eq!(s.status(), Status::NoChange);
}

#[test]
fn agent_failure_sets_error_status() {
    let llm = ScriptedProvider::from_responses([(AgentTag::Planner, vec!["I cannot help with that."])]);
    let mut s = Session::start("s", "q", config(3), deps(llm, MemoryStore::new())).unwrap();
    s.run_to_completion().unwrap();
    assert_eq!(s.status(), Status::Error);
    assert_eq!(s.state().error.as_ref().unwrap().phase, Phase::Planning);
    assert_eq!(kinds(&s), [EventKind::Error]);
}

#[test]
fn self_learning_write_back() {
    let mut store = MemoryStore::new();
    store.add(MemoryKind::Episodic, "If the audience is too small, lower the threshold", MemorySource::Human).unwrap();

    let mut off = config(3);
    off.self_learning = false;
    let d = deps(challenge_script(), store.clone());
    let hash = store.content_hash();
    Session::start("s", CHALLENGE_QUERY, off, d.clone()).unwrap().run_to_completion().unwrap();
    assert_eq!(d.memory.read().unwrap().content_hash(), hash);

    let mut on = config(3);
    on.self_learning = true;
    let d = deps(challenge_script(), store);
    let mut s = Session::start("s", CHALLENGE_QUERY, on, d.clone()).unwrap();
    s.run_to_completion().unwrap();
    assert!(kinds(&s).contains(&EventKind::Insight));
    let mem = d.memory.read().unwrap();
    let learned = mem.list(MemoryKind::Semantic);
    assert_eq!(learned.len(), 2);
    assert!(learned.iter().all(|m| m.source == MemorySource::SelfLearned));
    let hits = mem.retrieve(
        MemoryKind::Semantic,
        "audience too small for hotel propensity",
        &ramp_core::memory::RetrievalConfig::top(1),
    );
    assert_eq!(hits[0].text, "When the audience is too small, lower the hotel propensity threshold.");
}

#[test]
fn polling_cursor() {
    let mut s = Session::start("s", CHALLENGE_QUERY, config(3), deps(challenge_script(), MemoryStore::new())).unwrap();
    let mut seen = Vec::new();
    let mut cursor = None;
    while s.status() == Status::Running {
        s.step().unwrap();
        let new: Vec<u64> = s.events_after(cursor).iter().map(|e| e.seq).collect();
        if let Some(&last) = new.last() {
            cursor = Some(last);
        }
        seen.extend(new);
    }
    let all: Vec<u64> = (1..=s.state().transcript.len() as u64).collect();
    assert_eq!(seen, all);
    assert!(s.events_after(cursor).is_empty());
}

#[test]
fn state_serializes() {
    let mut s = Session::start("s", CHALLENGE_QUERY, config(3), deps(challenge_script(), MemoryStore::new())).unwrap();
    s.run_to_completion().unwrap();
    let v = serde_json::to_value(s.state()).unwrap();
    assert_eq!(v["status"], "success");
    assert_eq!(v["phase"], "done");
    assert_eq!(v["transcript"][0]["kind"], "plan");
    let back: ramp_core::orchestrator::SessionState = serde_json::from_value(v).unwrap();
    assert_eq!(&back, s.state());
}
