//! Remote chat-completions backend: one POST per `complete` call, retried on
//! transient failures with exponential backoff, bounded by an in-flight cap.

use crate::backend::{Backend, BackendError, CompletionRequest, CompletionResponse};
use serde::{Deserialize, Serialize};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// Environment variable holding the API credential.
pub const API_KEY_ENV: &str = "CONTEXTSIM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Backoff before retry k (milliseconds); the last entry repeats.
    pub backoff_ms: Vec<u64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, backoff_ms: vec![500, 1000, 2000] }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let index = (attempt as usize).min(self.backoff_ms.len().saturating_sub(1));
        Duration::from_millis(self.backoff_ms.get(index).copied().unwrap_or(500))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub completions_path: String,
    pub model: String,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Maximum concurrent in-flight requests.
    pub max_in_flight: usize,
    pub timeout_seconds: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000".into(),
            completions_path: "/v1/chat/completions".into(),
            model: "qwen3-8b".into(),
            retry: RetryPolicy::default(),
            max_in_flight: 8,
            timeout_seconds: 60,
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
    messages: [WireMessage<'a>; 2],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireContent,
}

#[derive(Deserialize)]
struct WireContent {
    content: String,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    completion_tokens: u64,
}

/// The exact request body bytes for a completion request. Prompts are carried
/// through unmodified; the body is byte-stable for a fixed request.
pub fn request_body_json(request: &CompletionRequest, model: &str) -> String {
    let wire = WireRequest {
        model,
        messages: [
            WireMessage { role: "system", content: &request.system_text },
            WireMessage { role: "user", content: &request.user_text },
        ],
        temperature: request.temperature,
        max_tokens: request.max_tokens,
        seed: request.seed,
    };
    serde_json::to_string(&wire).expect("wire request serializes")
}

struct Gate {
    slots: Mutex<usize>,
    available: Condvar,
}

impl Gate {
    fn new(capacity: usize) -> Self {
        Self { slots: Mutex::new(capacity.max(1)), available: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.available.wait(slots).unwrap();
        }
        *slots -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut slots = self.gate.slots.lock().unwrap();
        *slots += 1;
        self.gate.available.notify_one();
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(config: HttpConfig, api_key: String) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_seconds))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let gate = Gate::new(config.max_in_flight);
        Ok(Self { config, api_key, client, gate })
    }

    /// Read the credential from `CONTEXTSIM_API_KEY`.
    pub fn from_env(config: HttpConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| BackendError::Transport(format!("{API_KEY_ENV} not set")))?;
        Self::new(config, api_key)
    }

    fn endpoint(&self) -> String {
        format!(
            "{}{}",
            self.config.base_url.trim_end_matches('/'),
            self.config.completions_path
        )
    }

    fn attempt(&self, body: &str) -> Result<CompletionResponse, (bool, BackendError)> {
        let result = self
            .client
            .post(self.endpoint())
            .header("Content-Type", "application/json")
            .header("Authorization", format!("Bearer {}", self.api_key))
            .body(body.to_string())
            .send();
        let response = match result {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Err((true, BackendError::Timeout)),
            Err(e) => return Err((true, BackendError::Transport(e.to_string()))),
        };
        let status = response.status().as_u16();
        let text = response.text().unwrap_or_default();
        if status >= 500 || status == 429 {
            let excerpt: String = text.chars().take(200).collect();
            return Err((true, BackendError::RemoteError { status, excerpt }));
        }
        if status >= 400 {
            let excerpt: String = text.chars().take(200).collect();
            return Err((false, BackendError::RemoteError { status, excerpt }));
        }
        let wire: WireResponse = serde_json::from_str(&text).map_err(|e| {
            (false, BackendError::Transport(format!("unparseable response: {e}")))
        })?;
        let content = wire
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .filter(|c| !c.is_empty())
            .ok_or((false, BackendError::Transport("empty completion".into())))?;
        let token_estimate = wire
            .usage
            .map(|u| u.completion_tokens)
            .unwrap_or_else(|| (content.len() / 4) as u64);
        Ok(CompletionResponse { text: content, token_estimate, backend_name: "http".into() })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let _slot = self.gate.acquire();
        let body = request_body_json(request, &self.config.model);
        let mut last_error = String::new();
        for attempt in 0..self.config.retry.max_attempts {
            match self.attempt(&body) {
                Ok(response) => return Ok(response),
                Err((retryable, error)) => {
                    if !retryable {
                        return Err(error);
                    }
                    last_error = error.to_string();
                    if attempt + 1 < self.config.retry.max_attempts {
                        std::thread::sleep(self.config.retry.backoff(attempt));
                    }
                }
            }
        }
        Err(BackendError::BackendUnavailable {
            attempts: self.config.retry.max_attempts,
            last_error,
        })
    }

    fn name(&self) -> &str {
        "http"
    }
}
