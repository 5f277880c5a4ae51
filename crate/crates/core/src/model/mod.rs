//! Uniform completion interface shared by the local template fallback and the
//! diagnosis synthesis step.
//!
//! Backends: [`MockClient`] (pure function of the request), [`ReplayClient`]
//! (recorded transcripts keyed by request hash) and [`HttpChatClient`]
//! (chat-completions JSON over HTTP). [`RecordingClient`] wraps any backend
//! and writes a replayable transcript.

mod http;
mod replay;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpChatClient, HttpConfig};
pub use replay::{load_transcripts, RecordingClient, ReplayClient, TranscriptEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    L3Parse,
    Synthesis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub purpose: Purpose,
}

impl ModelRequest {
    /// Builds a request. Synthesis requests are always sent at temperature 0.
    pub fn new(purpose: Purpose, messages: Vec<ChatMessage>, temperature: f64, max_tokens: u32) -> Result<Self, ClientError> {
        if messages.is_empty() || messages.iter().all(|m| m.content.trim().is_empty()) {
            return Err(ClientError::InvalidRequest("empty prompt".into()));
        }
        let temperature = match purpose {
            Purpose::Synthesis => 0.0,
            Purpose::L3Parse => temperature,
        };
        Ok(Self { messages, temperature, max_tokens, purpose })
    }

    /// SHA-256 over the canonical JSON encoding, lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn last_content(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub latency_ms: f64,
    pub provider_tag: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("model backend unavailable: {0}")]
    Unavailable(String),
    #[error("no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("request timed out")]
    Timeout,
    #[error("http status {0}: {1}")]
    HttpStatus(u16, String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript io: {0}")]
    Io(String),
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError>;

    fn provider_tag(&self) -> &str;
}

impl<C: ModelClient + ?Sized> ModelClient for Arc<C> {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError> {
        (**self).complete(req)
    }

    fn provider_tag(&self) -> &str {
        (**self).provider_tag()
    }
}

impl<C: ModelClient + ?Sized> ModelClient for &C {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError> {
        (**self).complete(req)
    }

    fn provider_tag(&self) -> &str {
        (**self).provider_tag()
    }
}

/// Behavior of the mock for requests absent from its fixture map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockBehavior {
    /// Return the content of the last message verbatim.
    Echo,
    /// Parse requests echo; synthesis requests answer with the first candidate
    /// root and the first case action found in the prompt's evidence block.
    #[default]
    Grounded,
    /// Every call fails with `Unavailable`.
    Offline,
}

/// Deterministic offline backend.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    fixtures: BTreeMap<String, String>,
    behavior: MockBehavior,
}

impl MockClient {
    pub fn new(behavior: MockBehavior) -> Self {
        Self { fixtures: BTreeMap::new(), behavior }
    }

    /// Pins the response for one request hash.
    pub fn with_fixture(mut self, request_hash: impl Into<String>, text: impl Into<String>) -> Self {
        self.fixtures.insert(request_hash.into(), text.into());
        self
    }

    pub fn behavior(&self) -> MockBehavior {
        self.behavior
    }

    fn grounded_answer(req: &ModelRequest) -> String {
        let content = req.last_content();
        let block = |marker: &str| {
            content
                .lines()
                .find_map(|l| l.strip_prefix(marker))
                .and_then(|json| serde_json::from_str::<serde_json::Value>(json.trim()).ok())
        };
        let root = block("EVIDENCE_JSON:")
            .and_then(|v| v["candidate_roots"][0]["template_id"].as_str().map(str::to_owned));
        let action = block("CASES_JSON:")
            .and_then(|v| v[0]["repair_action"].as_str().map(str::to_owned));
        match root {
            Some(root) => serde_json::json!({
                "root_cause_template": root,
                "action": action.unwrap_or_else(|| "escalate to operator".into()),
            })
            .to_string(),
            None => content.to_string(),
        }
    }
}

impl ModelClient for MockClient {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError> {
        let hash = req.hash();
        let text = if let Some(t) = self.fixtures.get(&hash) {
            t.clone()
        } else {
            match (self.behavior, req.purpose) {
                (MockBehavior::Offline, _) => return Err(ClientError::Unavailable("mock offline".into())),
                (MockBehavior::Grounded, Purpose::Synthesis) => Self::grounded_answer(req),
                _ => req.last_content().to_string(),
            }
        };
        Ok(ModelResponse { text, latency_ms: 0.0, provider_tag: "mock".into() })
    }

    fn provider_tag(&self) -> &str {
        "mock"
    }
}

/// Counts calls reaching the wrapped backend.
#[derive(Debug)]
pub struct CountingClient<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C> CountingClient<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: ModelClient> ModelClient for CountingClient<C> {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }

    fn provider_tag(&self) -> &str {
        self.inner.provider_tag()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Mock,
    Replay,
    Http,
}

/// Backend selection as it appears in the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClientConfig {
    pub backend: Backend,
    pub mock_behavior: MockBehavior,
    /// Transcript file for replay mode, or the record target in http mode.
    pub transcripts: Option<std::path::PathBuf>,
    pub http: HttpConfig,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Mock,
            mock_behavior: MockBehavior::Grounded,
            transcripts: None,
            http: HttpConfig::default(),
        }
    }
}

/// Builds the configured backend. `offline` forces the mock.
pub fn build_client(cfg: &ClientConfig, offline: bool) -> Result<Box<dyn ModelClient>, ClientError> {
    if offline {
        return Ok(Box::new(MockClient::new(cfg.mock_behavior)));
    }
    match cfg.backend {
        Backend::Mock => Ok(Box::new(MockClient::new(cfg.mock_behavior))),
        Backend::Replay => {
            let path = cfg
                .transcripts
                .as_ref()
                .ok_or_else(|| ClientError::InvalidRequest("replay backend needs a transcripts path".into()))?;
            Ok(Box::new(ReplayClient::from_file(path)?))
        }
        Backend::Http => {
            let client = HttpChatClient::new(cfg.http.clone());
            match &cfg.transcripts {
                Some(path) => Ok(Box::new(RecordingClient::create(client, path)?)),
                None => Ok(Box::new(client)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ModelRequest {
        ModelRequest::new(Purpose::L3Parse, vec![ChatMessage::user(text)], 0.2, 64).unwrap()
    }

    #[test]
    fn fixture_map_answers_matching_request() {
        let r = req("hello");
        let mock = MockClient::new(MockBehavior::Echo).with_fixture(r.hash(), "X");
        assert_eq!(mock.complete(&r).unwrap().text, "X");
        assert_eq!(mock.complete(&req("other")).unwrap().text, "other");
    }

    #[test]
    fn mock_is_deterministic() {
        let mock = MockClient::default();
        let r = req("same");
        assert_eq!(mock.complete(&r).unwrap(), mock.complete(&r).unwrap());
    }

    #[test]
    fn synthesis_temperature_forced_to_zero() {
        let r = ModelRequest::new(Purpose::Synthesis, vec![ChatMessage::user("x")], 0.9, 10).unwrap();
        assert_eq!(r.temperature, 0.0);
        assert!(ModelRequest::new(Purpose::Synthesis, vec![], 0.0, 10).is_err());
    }

    #[test]
    fn request_hash_is_stable_and_content_sensitive() {
        assert_eq!(req("a").hash(), req("a").hash());
        assert_ne!(req("a").hash(), req("b").hash());
        assert_eq!(req("a").hash().len(), 64);
    }

    #[test]
    fn offline_mock_fails() {
        let mock = MockClient::new(MockBehavior::Offline);
        assert!(matches!(mock.complete(&req("x")), Err(ClientError::Unavailable(_))));
    }

    #[test]
    fn grounded_mock_reads_evidence_block() {
        let prompt = "preamble\nEVIDENCE_JSON: {\"candidate_roots\":[{\"template_id\":\"abc\",\"score\":1.0}]}\nCASES_JSON: [{\"repair_action\":\"restart datanode\"}]\n";
        let r = ModelRequest::new(Purpose::Synthesis, vec![ChatMessage::user(prompt)], 0.0, 10).unwrap();
        let text = MockClient::default().complete(&r).unwrap().text;
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["root_cause_template"], "abc");
        assert_eq!(v["action"], "restart datanode");
    }

    #[test]
    fn counting_wrapper_counts() {
        let c = CountingClient::new(MockClient::default());
        c.complete(&req("a")).unwrap();
        c.complete(&req("b")).unwrap();
        assert_eq!(c.calls(), 2);
    }
}
