use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{ClientError, ModelClient, ModelRequest, ModelResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub retries: u32,
    /// Minimum spacing between requests; 0 disables rate limiting.
    pub min_interval_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: "EDGEHEAL_API_KEY".into(),
            timeout_ms: 30_000,
            retries: 2,
            min_interval_ms: 0,
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

/// Blocking chat-completions client with bounded timeout and retries.
pub struct HttpChatClient {
    cfg: HttpConfig,
    agent: ureq::Agent,
    last_call: Mutex<Option<Instant>>,
}

impl HttpChatClient {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self { cfg, agent, last_call: Mutex::new(None) }
    }

    fn throttle(&self) {
        if self.cfg.min_interval_ms == 0 {
            return;
        }
        let gap = Duration::from_millis(self.cfg.min_interval_ms);
        let mut last = self.last_call.lock().expect("rate limiter lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < gap {
                std::thread::sleep(gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, body: &str) -> Result<String, ClientError> {
        let mut request = self.agent.post(&self.cfg.endpoint).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.cfg.api_key_env) {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ClientError::Timeout,
            other => ClientError::Transport(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ClientError::HttpStatus(status, text));
        }
        let parsed: WireResponse =
            serde_json::from_str(&text).map_err(|e| ClientError::Transport(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ClientError::Transport("response has no choices".into()))
    }
}

fn retryable(e: &ClientError) -> bool {
    match e {
        ClientError::Timeout | ClientError::Transport(_) => true,
        ClientError::HttpStatus(code, _) => *code == 429 || *code >= 500,
        _ => false,
    }
}

impl ModelClient for HttpChatClient {
    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, ClientError> {
        let wire = WireRequest {
            model: &self.cfg.model,
            messages: req.messages.iter().map(|m| WireMessage { role: &m.role, content: &m.content }).collect(),
            temperature: req.temperature,
            max_tokens: req.max_tokens,
        };
        let body = serde_json::to_string(&wire).expect("wire request serializes");
        let started = Instant::now();
        let mut last_err = ClientError::Unavailable("no attempt made".into());
        for attempt in 0..=self.cfg.retries {
            self.throttle();
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(ModelResponse {
                        text,
                        latency_ms: started.elapsed().as_secs_f64() * 1e3,
                        provider_tag: format!("http:{}", self.cfg.model),
                    })
                }
                Err(e) if retryable(&e) && attempt < self.cfg.retries => {
                    log::warn!("model call attempt {} failed: {e}", attempt + 1);
                    last_err = e;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err)
    }

    fn provider_tag(&self) -> &str {
        "http"
    }
}
