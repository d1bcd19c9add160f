use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendKind, GenBackend, GenError, Prompt};

/// Name of the variable holding the bearer token for backend `id`.
pub fn api_key_env_var(id: &str) -> String {
    let suffix: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("REX_API_KEY_{suffix}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpChatConfig {
    pub id: String,
    /// e.g. `https://api.example.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub timeout_s: f64,
    /// Extra tries after a transport error or 5xx response.
    pub retries: u32,
    pub retry_backoff_s: f64,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Requests per minute across all workers; 0 disables the limiter.
    pub requests_per_minute: u32,
}

impl Default for HttpChatConfig {
    fn default() -> Self {
        Self {
            id: "openai".into(),
            base_url: "https://api.openai.com/v1".into(),
            model: String::new(),
            timeout_s: 300.0,
            retries: 2,
            retry_backoff_s: 2.0,
            temperature: 0.2,
            max_tokens: 8192,
            requests_per_minute: 0,
        }
    }
}

/// OpenAI-style chat-completion client.
pub struct HttpChatBackend {
    config: HttpChatConfig,
    api_key: String,
    agent: ureq::Agent,
    next_slot: Mutex<Instant>,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl HttpChatBackend {
    /// Reads the API key from `REX_API_KEY_<ID>`.
    pub fn from_env(config: HttpChatConfig) -> Result<Self, GenError> {
        let var = api_key_env_var(&config.id);
        let key = std::env::var(&var)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GenError::Config(format!("environment variable {var} is not set")))?;
        Self::new(config, key)
    }

    pub fn new(config: HttpChatConfig, api_key: String) -> Result<Self, GenError> {
        if config.model.is_empty() {
            return Err(GenError::Config("model name is empty".into()));
        }
        if config.base_url.is_empty() {
            return Err(GenError::Config("base URL is empty".into()));
        }
        if !(config.timeout_s > 0.0 && config.timeout_s.is_finite()) {
            return Err(GenError::Config("timeout must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            api_key,
            agent,
            next_slot: Mutex::new(Instant::now()),
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    /// Blocks until this caller's slot under the shared rate limit.
    fn throttle(&self) {
        if self.config.requests_per_minute == 0 {
            return;
        }
        let interval = Duration::from_secs_f64(60.0 / f64::from(self.config.requests_per_minute));
        let wait_until = {
            let mut next = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot
        };
        let now = Instant::now();
        if wait_until > now {
            std::thread::sleep(wait_until - now);
        }
    }

    fn request_once(&self, body: &Value) -> Result<String, Attempt> {
        self.throttle();
        let mut resp = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| Attempt::Retry(GenError::TransportError(e.to_string())))?;
        let status = resp.status().as_u16();
        let retry_after_s = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok());
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(GenError::TransportError(e.to_string())))?;
        match status {
            200..=299 => parse_completion(&text).map_err(Attempt::Fatal),
            429 => Err(Attempt::Fatal(GenError::RateLimited { retry_after_s })),
            500..=599 => Err(Attempt::Retry(GenError::TransportError(format!(
                "HTTP {status}: {}",
                snippet(&text)
            )))),
            _ => Err(Attempt::Fatal(GenError::BackendRefused(format!(
                "HTTP {status}: {}",
                snippet(&text)
            )))),
        }
    }
}

enum Attempt {
    Retry(GenError),
    Fatal(GenError),
}

fn snippet(text: &str) -> &str {
    let mut end = text.len().min(300);
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    text[..end].trim()
}

fn parse_completion(text: &str) -> Result<String, GenError> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| GenError::TransportError(format!("malformed response body: {e}")))?;
    let choice = &v["choices"][0];
    if let Some(content) = choice["message"]["content"].as_str() {
        return Ok(content.to_string());
    }
    if let Some(refusal) = choice["message"]["refusal"].as_str() {
        return Err(GenError::BackendRefused(refusal.to_string()));
    }
    Err(GenError::TransportError("response has no choices[0].message.content".into()))
}

impl GenBackend for HttpChatBackend {
    fn id(&self) -> &str {
        &self.config.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::HttpChat
    }

    fn generate(&self, prompt: &Prompt) -> Result<String, GenError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let mut tries = 0;
        loop {
            tries += 1;
            debug!("{}: case {} attempt {} try {tries}", self.config.id, prompt.case_id, prompt.attempt_no);
            match self.request_once(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) if tries > self.config.retries => return Err(e),
                Err(Attempt::Retry(e)) => {
                    warn!("{}: {e}; retrying", self.config.id);
                    std::thread::sleep(Duration::from_secs_f64(
                        self.config.retry_backoff_s * f64::from(tries),
                    ));
                }
            }
        }
    }
}
