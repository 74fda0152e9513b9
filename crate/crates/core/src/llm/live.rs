use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatRequest, ChatResponse, LlmError, LlmProvider, ProviderKind, TokenUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    /// Base URL (`.../v1`) or the full `.../chat/completions` URL.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub model_id: String,
    pub timeout_secs: u64,
    /// Retries after the first attempt for transient failures.
    pub max_retries: usize,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            model_id: "gpt-4.1".into(),
            timeout_secs: 120,
            max_retries: 3,
            backoff_base_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl LiveConfig {
    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Counting semaphore bounding concurrent in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct LiveProvider {
    config: LiveConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// Chat-completions request body for `req`.
pub(crate) fn request_body(req: &ChatRequest, default_model: &str) -> serde_json::Value {
    let model = if req.model_id.is_empty() {
        default_model
    } else {
        req.model_id.as_str()
    };
    json!({
        "model": model,
        "messages": [
            {"role": "system", "content": req.system},
            {"role": "user", "content": req.user},
        ],
        "temperature": req.temperature,
    })
}

impl LiveProvider {
    /// Reads the API key from `config.api_key_env`; a missing key is allowed
    /// for local endpoints that do not authenticate.
    pub fn new(config: LiveConfig) -> Result<Self, LlmError> {
        if config.max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        let api_key = std::env::var(&config.api_key_env).ok();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let gate = Gate {
            free: Mutex::new(config.max_in_flight),
            cv: Condvar::new(),
        };
        Ok(LiveProvider {
            config,
            api_key,
            client,
            gate,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<ChatResponse, LlmError> {
        let mut call = self.client.post(self.config.url()).json(body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Http { status, body: text });
        }
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| LlmError::InvalidResponse(e.to_string()))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::InvalidResponse("no choices in response".into()))?;
        Ok(ChatResponse {
            text: content,
            token_usage: wire.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
            provider: ProviderKind::Live,
        })
    }
}

impl LlmProvider for LiveProvider {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let body = request_body(req, &self.config.model_id);
        let _slot = self.gate.acquire();
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(resp) => return Ok(resp),
                Err(e) if e.is_transient() && attempt < self.config.max_retries => {
                    let delay = self.config.backoff_base_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("{} call failed ({e}); retrying in {delay} ms", req.agent_tag);
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(LlmError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::AgentTag;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    /// Serves one canned `(status, body)` per connection and records request bodies.
    fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let seen2 = Arc::clone(&seen);
        thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen2.lock().unwrap().push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (format!("http://{addr}/v1"), seen)
    }

    fn ok_body(text: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": text}}],
               "usage": {"prompt_tokens": 3, "completion_tokens": 2}})
        .to_string()
    }

    fn provider(endpoint: String) -> LiveProvider {
        LiveProvider::new(LiveConfig {
            endpoint,
            api_key_env: "RAMP_TEST_UNSET_KEY".into(),
            model_id: "test-model".into(),
            timeout_secs: 5,
            max_retries: 3,
            backoff_base_ms: 1,
            max_in_flight: 2,
        })
        .unwrap()
    }

    #[test]
    fn unset_temperature_serializes_as_zero() {
        let req = ChatRequest::new(AgentTag::Planner, "sys", "user");
        let body = request_body(&req, "m");
        assert_eq!(body["temperature"], json!(0.0));
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "user");
        assert_eq!(body["model"], "m");
    }

    #[test]
    fn url_normalization() {
        let mut c = LiveConfig::default();
        assert!(c.url().ends_with("/v1/chat/completions"));
        c.endpoint = "http://x/v1/chat/completions/".into();
        assert_eq!(c.url(), "http://x/v1/chat/completions");
    }

    #[test]
    fn returns_first_choice() {
        let (url, seen) = serve(vec![(200, ok_body("Plan:\n1. a"))]);
        let resp = provider(url)
            .complete(&ChatRequest::new(AgentTag::Planner, "s", "u"))
            .unwrap();
        assert_eq!(resp.text, "Plan:\n1. a");
        assert_eq!(resp.provider, ProviderKind::Live);
        assert_eq!(resp.token_usage.unwrap().completion_tokens, 2);
        let body: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
        assert_eq!(body["temperature"], json!(0.0));
        assert_eq!(body["model"], "test-model");
    }

    #[test]
    fn retries_transient_failures() {
        let (url, seen) = serve(vec![
            (429, "{}".into()),
            (503, "{}".into()),
            (200, ok_body("ok")),
        ]);
        let resp = provider(url)
            .complete(&ChatRequest::new(AgentTag::Actor, "s", "u"))
            .unwrap();
        assert_eq!(resp.text, "ok");
        assert_eq!(seen.lock().unwrap().len(), 3);
    }

    #[test]
    fn gives_up_after_retry_cap() {
        let (url, seen) = serve(vec![(500, "{}".into()); 4]);
        let err = provider(url)
            .complete(&ChatRequest::new(AgentTag::Actor, "s", "u"))
            .unwrap_err();
        assert!(matches!(err, LlmError::RetriesExhausted { attempts: 4, .. }));
        assert_eq!(seen.lock().unwrap().len(), 4);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, seen) = serve(vec![(400, "bad".into())]);
        let err = provider(url)
            .complete(&ChatRequest::new(AgentTag::Actor, "s", "u"))
            .unwrap_err();
        assert!(matches!(err, LlmError::Http { status: 400, .. }));
        assert_eq!(seen.lock().unwrap().len(), 1);
    }
}
