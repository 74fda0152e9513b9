use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{AgentTag, ChatRequest, ChatResponse, LlmError, LlmProvider, ProviderKind};

/// One line of a replay transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub agent_tag: AgentTag,
    pub call_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    pub response_text: String,
    /// Scopes an entry to one benchmark case when a file holds many sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
}

impl TranscriptEntry {
    pub fn new(agent_tag: AgentTag, call_index: usize, response_text: impl Into<String>) -> Self {
        TranscriptEntry {
            agent_tag,
            call_index,
            prompt_sha256: None,
            response_text: response_text.into(),
            query_id: None,
        }
    }
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LlmError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| LlmError::Transcript {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Replays recorded responses by `(agent_tag, per-tag call index)`.
#[derive(Debug)]
pub struct ScriptedProvider {
    entries: HashMap<(AgentTag, usize), TranscriptEntry>,
    counters: Mutex<HashMap<AgentTag, usize>>,
    check_digests: bool,
}

impl ScriptedProvider {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        ScriptedProvider {
            entries: entries
                .into_iter()
                .map(|e| ((e.agent_tag, e.call_index), e))
                .collect(),
            counters: Mutex::new(HashMap::new()),
            check_digests: false,
        }
    }

    /// Build from plain response lists, one per tag, in call order.
    pub fn from_responses<S: Into<String>>(
        responses: impl IntoIterator<Item = (AgentTag, Vec<S>)>,
    ) -> Self {
        let entries = responses.into_iter().flat_map(|(tag, texts)| {
            texts
                .into_iter()
                .enumerate()
                .map(move |(i, t)| TranscriptEntry::new(tag, i, t))
        });
        Self::new(entries)
    }

    /// Assert recorded prompt digests (entries without one are not checked).
    pub fn with_digest_checks(mut self, on: bool) -> Self {
        self.check_digests = on;
        self
    }

    pub fn calls_made(&self, tag: AgentTag) -> usize {
        *self.counters.lock().unwrap().get(&tag).unwrap_or(&0)
    }
}

impl LlmProvider for ScriptedProvider {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let index = {
            let mut counters = self.counters.lock().unwrap();
            let slot = counters.entry(req.agent_tag).or_insert(0);
            let index = *slot;
            *slot += 1;
            index
        };
        let entry = self
            .entries
            .get(&(req.agent_tag, index))
            .ok_or(LlmError::TranscriptExhausted {
                tag: req.agent_tag,
                index,
            })?;
        if self.check_digests {
            if let Some(expected) = &entry.prompt_sha256 {
                let actual = req.prompt_digest();
                if &actual != expected {
                    return Err(LlmError::DigestMismatch {
                        tag: req.agent_tag,
                        index,
                        expected: expected.clone(),
                        actual,
                    });
                }
            }
        }
        Ok(ChatResponse {
            text: entry.response_text.clone(),
            token_usage: None,
            provider: ProviderKind::Scripted,
        })
    }
}

struct RecorderState {
    sink: Box<dyn Write + Send>,
    counters: HashMap<AgentTag, usize>,
    entries: Vec<TranscriptEntry>,
}

/// Wraps a provider and appends every call to a JSONL transcript that
/// [`ScriptedProvider`] can replay.
pub struct RecordingProvider<P> {
    inner: P,
    state: Mutex<RecorderState>,
}

impl<P: LlmProvider> RecordingProvider<P> {
    pub fn new(inner: P, sink: Box<dyn Write + Send>) -> Self {
        RecordingProvider {
            inner,
            state: Mutex::new(RecorderState {
                sink,
                counters: HashMap::new(),
                entries: Vec::new(),
            }),
        }
    }

    pub fn to_file(inner: P, path: &Path) -> Result<Self, LlmError> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(Self::new(inner, Box::new(file)))
    }

    /// Everything recorded so far.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.state.lock().unwrap().entries.clone()
    }
}

impl<P: LlmProvider> LlmProvider for RecordingProvider<P> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        // Hold the lock across the call so indices match completion order.
        let mut state = self.state.lock().unwrap();
        let resp = self.inner.complete(req)?;
        let slot = state.counters.entry(req.agent_tag).or_insert(0);
        let entry = TranscriptEntry {
            agent_tag: req.agent_tag,
            call_index: *slot,
            prompt_sha256: Some(req.prompt_digest()),
            response_text: resp.text.clone(),
            query_id: None,
        };
        *slot += 1;
        let line = serde_json::to_string(&entry).expect("transcript entry serializes");
        writeln!(state.sink, "{line}")?;
        state.sink.flush()?;
        state.entries.push(entry);
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex as StdMutex};

    fn req(tag: AgentTag, user: &str) -> ChatRequest {
        ChatRequest::new(tag, "system", user)
    }

    #[test]
    fn replays_then_exhausts() {
        let p = ScriptedProvider::from_responses([(AgentTag::Planner, vec!["Plan:\n1. x"])]);
        assert_eq!(p.complete(&req(AgentTag::Planner, "q")).unwrap().text, "Plan:\n1. x");
        let err = p.complete(&req(AgentTag::Planner, "q")).unwrap_err();
        assert!(matches!(err, LlmError::TranscriptExhausted { index: 1, .. }));
        assert!(err.to_string().contains("transcript exhausted"));
    }

    #[test]
    fn per_tag_indices_are_independent() {
        let p = ScriptedProvider::from_responses([
            (AgentTag::Planner, vec!["p0", "p1"]),
            (AgentTag::VerifierExtract, vec!["v0"]),
        ]);
        assert_eq!(p.complete(&req(AgentTag::Planner, "")).unwrap().text, "p0");
        assert_eq!(p.complete(&req(AgentTag::Planner, "")).unwrap().text, "p1");
        assert_eq!(p.complete(&req(AgentTag::VerifierExtract, "")).unwrap().text, "v0");
        assert_eq!(p.calls_made(AgentTag::Planner), 2);
    }

    #[test]
    fn digest_mismatch_is_reported() {
        let mut e = TranscriptEntry::new(AgentTag::Actor, 0, "state = \"NY\"");
        e.prompt_sha256 = Some(req(AgentTag::Actor, "P").prompt_digest());
        let strict = ScriptedProvider::new([e.clone()]).with_digest_checks(true);
        assert!(matches!(
            strict.complete(&req(AgentTag::Actor, "P'")),
            Err(LlmError::DigestMismatch { .. })
        ));
        let strict = ScriptedProvider::new([e.clone()]).with_digest_checks(true);
        assert!(strict.complete(&req(AgentTag::Actor, "P")).is_ok());
        let lax = ScriptedProvider::new([e]);
        assert!(lax.complete(&req(AgentTag::Actor, "P'")).is_ok());
    }

    #[derive(Clone, Default)]
    struct SharedBuf(Arc<StdMutex<Vec<u8>>>);

    impl Write for SharedBuf {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn record_then_replay() {
        let source = ScriptedProvider::from_responses([
            (AgentTag::Planner, vec!["a"]),
            (AgentTag::Reflector, vec!["b"]),
        ]);
        let buf = SharedBuf::default();
        let rec = RecordingProvider::new(source, Box::new(buf.clone()));
        let r1 = rec.complete(&req(AgentTag::Planner, "one")).unwrap();
        let r2 = rec.complete(&req(AgentTag::Reflector, "two")).unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        assert_eq!(text.lines().count(), 2);

        let entries: Vec<TranscriptEntry> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(entries, rec.transcript());
        let replay = ScriptedProvider::new(entries.clone()).with_digest_checks(true);
        assert_eq!(replay.complete(&req(AgentTag::Planner, "one")).unwrap().text, r1.text);
        assert_eq!(replay.complete(&req(AgentTag::Reflector, "two")).unwrap().text, r2.text);

        let changed = ScriptedProvider::new(entries).with_digest_checks(true);
        assert!(matches!(
            changed.complete(&req(AgentTag::Planner, "one, edited")),
            Err(LlmError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn transcript_wire_format() {
        let mut e = TranscriptEntry::new(AgentTag::VerifierCompile, 3, "count >= 300");
        e.prompt_sha256 = Some("ab".into());
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "agent_tag": "verifier_compile",
                "call_index": 3,
                "prompt_sha256": "ab",
                "response_text": "count >= 300"
            })
        );
    }
}
