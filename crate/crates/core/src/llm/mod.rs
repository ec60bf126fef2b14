//! Chat-completion interface used by the agent stages.
//!
//! [`HttpChatClient`] speaks the OpenAI-compatible `/chat/completions` wire
//! protocol; the stubs in [`stub`] provide scripted, rule-based and
//! fault-injecting backends for offline runs.

mod http;
pub mod stub;

pub use http::{HttpChatClient, RetryPolicy};
pub use stub::{FaultInjectingStub, RuleBasedStub, ScriptedStub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "DECOR_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "DECOR_LLM_API_KEY";
pub const ENV_MODEL: &str = "DECOR_LLM_MODEL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    /// JSON schema (as text) the reply must follow.
    pub response_schema: String,
    pub temperature: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    pub timeout_s: f64,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("messages must not be empty".into()));
        }
        if !(self.timeout_s > 0.0) {
            return Err(LlmError::InvalidRequest("timeout_s must be positive".into()));
        }
        Ok(())
    }

    /// Title of the response schema, used by stubs to tell stages apart.
    pub fn schema_title(&self) -> Option<String> {
        serde_json::from_str::<serde_json::Value>(&self.response_schema)
            .ok()?
            .get("title")?
            .as_str()
            .map(str::to_string)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
    pub usage: Usage,
}

impl ChatResponse {
    pub fn stop(content: impl Into<String>) -> Self {
        Self { content: content.into(), finish_reason: "stop".into(), usage: Usage::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication rejected (HTTP {status})")]
    Authentication { status: u16 },
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("backend returned no content")]
    EmptyResponse,
    #[error("stub error: {0}")]
    Stub(String),
    #[error("backend not configured: {0}")]
    NotConfigured(String),
}

/// A chat-completion backend. Calls are blocking and independent, so one
/// handle can be shared across threads.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<T: ChatClient + ?Sized> ChatClient for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<T: ChatClient + ?Sized> ChatClient for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}
