//! Uniform completion interface all agent reasoning runs over: one remote
//! HTTP implementation and one deterministic scripted implementation.
//!
//! Every prompt embeds a machine-readable `#TASK: <tag>` first line so the
//! scripted backend can dispatch without natural-language understanding.

pub mod http;
pub mod scripted;

pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub use scripted::{ClassifyMode, ScriptedBackend};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Closed set of reasoning tasks a request can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskTag {
    Persona,
    Score,
    Appraise,
    Internal,
    Act,
    Reflect,
    Rate,
    Classify,
    Schedule,
    Summarize,
    Interview,
    ThoughtId,
    ThoughtTa,
}

impl TaskTag {
    pub const ALL: [TaskTag; 13] = [
        TaskTag::Persona,
        TaskTag::Score,
        TaskTag::Appraise,
        TaskTag::Internal,
        TaskTag::Act,
        TaskTag::Reflect,
        TaskTag::Rate,
        TaskTag::Classify,
        TaskTag::Schedule,
        TaskTag::Summarize,
        TaskTag::Interview,
        TaskTag::ThoughtId,
        TaskTag::ThoughtTa,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TaskTag::Persona => "PERSONA",
            TaskTag::Score => "SCORE",
            TaskTag::Appraise => "APPRAISE",
            TaskTag::Internal => "INTERNAL",
            TaskTag::Act => "ACT",
            TaskTag::Reflect => "REFLECT",
            TaskTag::Rate => "RATE",
            TaskTag::Classify => "CLASSIFY",
            TaskTag::Schedule => "SCHEDULE",
            TaskTag::Summarize => "SUMMARIZE",
            TaskTag::Interview => "INTERVIEW",
            TaskTag::ThoughtId => "THOUGHT_ID",
            TaskTag::ThoughtTa => "THOUGHT_TA",
        }
    }

    pub fn from_label(label: &str) -> Option<TaskTag> {
        TaskTag::ALL.into_iter().find(|t| t.label() == label)
    }
}

/// One completion call. `user_text` always starts with the `#TASK:` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub task_tag: TaskTag,
}

impl CompletionRequest {
    /// Build a request, prepending the `#TASK:` tag line to the prompt body.
    pub fn new(task_tag: TaskTag, system_text: impl Into<String>, body: impl AsRef<str>) -> Self {
        Self {
            system_text: system_text.into(),
            user_text: format!("#TASK: {}\n{}", task_tag.label(), body.as_ref()),
            temperature: 0.7,
            max_tokens: 512,
            seed: None,
            task_tag,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub token_estimate: u64,
    pub backend_name: String,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("remote error {status}: {excerpt}")]
    RemoteError { status: u16, excerpt: String },
    #[error("unknown task tag in prompt: {0}")]
    UnknownTaskTag(String),
    #[error("backend unavailable after {attempts} attempts: {last_error}")]
    BackendUnavailable { attempts: u32, last_error: String },
    #[error("transport failure: {0}")]
    Transport(String),
}

/// The completion interface. Implementations must be safe to call from many
/// workers concurrently.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;

    fn name(&self) -> &str;

    /// True when responses are a pure function of the request (scripted).
    fn deterministic(&self) -> bool {
        false
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("field {0} missing from response")]
pub struct FieldMissing(pub String);

/// Extract the first `FIELD: value` line, case-insensitively, tolerating
/// leading list markers like `- `, `* `, or `1. `.
pub fn parse_tagged_field(text: &str, field_name: &str) -> Result<String, FieldMissing> {
    let needle = format!("{}:", field_name.to_uppercase());
    for line in text.lines() {
        let trimmed = line
            .trim_start()
            .trim_start_matches(['-', '*', '•'])
            .trim_start_matches(|c: char| c.is_ascii_digit())
            .trim_start_matches(['.', ')'])
            .trim_start();
        if trimmed.to_uppercase().starts_with(&needle) {
            let value = trimmed[needle.len()..].trim();
            return Ok(value.to_string());
        }
    }
    Err(FieldMissing(field_name.to_uppercase()))
}

/// Parse a tagged field as an integer, stripping brackets and trailing prose.
pub fn parse_tagged_int(text: &str, field_name: &str) -> Result<i64, FieldMissing> {
    let raw = parse_tagged_field(text, field_name)?;
    let cleaned: String = raw
        .trim_start_matches('[')
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '-' || *c == '+')
        .collect();
    cleaned.parse().map_err(|_| FieldMissing(field_name.to_uppercase()))
}

/// Parse a tagged field as a float.
pub fn parse_tagged_f64(text: &str, field_name: &str) -> Result<f64, FieldMissing> {
    let raw = parse_tagged_field(text, field_name)?;
    let cleaned: String = raw
        .trim_start_matches('[')
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '-' || *c == '+' || *c == '.')
        .collect();
    cleaned.parse().map_err(|_| FieldMissing(field_name.to_uppercase()))
}
