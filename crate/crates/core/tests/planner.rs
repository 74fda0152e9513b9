use ramp_core::agent::ModelHandle;
use ramp_core::llm::{AgentTag, ChatRequest, ChatResponse, LlmError, LlmProvider, ProviderKind};
use ramp_core::memory::{MemoryKind, MemorySource, MemoryStore, RetrievalConfig};
use ramp_core::planner::make_plan;

const STATE_FACT: &str = "The state column holds the two-letter mailing state of the customer; filter on state to select where users live.";

/// Plans by residence column only when the state fact reached the prompt;
/// otherwise it also guesses at web_destinations.
struct ReadsMemory;

impl LlmProvider for ReadsMemory {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        assert_eq!(req.agent_tag, AgentTag::Planner);
        let text = if req.user.contains(STATE_FACT) {
            "[PLANNER OUTPUT]\n\nPlan:\n1. Filter users whose age is below 30\n2. Filter users whose state is MA"
        } else {
            "Plan:\n1. Filter users whose age is below 30\n2. Filter users whose state is MA\n3. Filter users whose web_destinations contain Massachusetts"
        };
        Ok(ChatResponse {
            text: text.into(),
            token_usage: None,
            provider: ProviderKind::Scripted,
        })
    }
}

fn store() -> MemoryStore {
    let mut s = MemoryStore::new();
    s.add(MemoryKind::Semantic, STATE_FACT, MemorySource::Human).unwrap();
    s.add(MemoryKind::Semantic, "Propensity scores range from 0 to 100.", MemorySource::Human).unwrap();
    s.add(MemoryKind::Semantic, "loyalty_tier values are bronze, silver, gold and platinum.", MemorySource::Human)
        .unwrap();
    s
}

#[test]
fn massachusetts_query_plans_two_steps_with_state_memory() {
    let query = "users below 30 years old whose mailing address is in Massachusetts";
    let metadata = "- age (number)\n- state (text)\n- web_destinations (text_list)";
    let memories = store().retrieve(MemoryKind::Semantic, query, &RetrievalConfig::top(1));
    assert_eq!(memories[0].text, STATE_FACT);

    let plan = make_plan(query, metadata, "", &memories, ModelHandle::new(&ReadsMemory, "m")).unwrap();
    assert_eq!(plan.steps.len(), 2);
    assert!(plan.steps[0].contains("age"));
    assert!(plan.steps[1].contains("state"));

    let without = make_plan(query, metadata, "", &[], ModelHandle::new(&ReadsMemory, "m")).unwrap();
    assert_eq!(without.steps.len(), 3);
}
