//! Uniform chat-completion interface over interchangeable backends: a live
//! HTTP backend, a scripted queue for tests, and record/replay cassettes for
//! reproducible end-to-end runs.

mod cassette;
mod digest;
mod live;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GenerationParams;

pub use cassette::{Cassette, CassetteEntry, RecordingBackend, ReplayBackend};
pub use digest::request_digest;
pub use live::{LiveBackend, LiveConfig, RetryPolicy};
pub use scripted::ScriptedBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

/// One message in a chat transcript. Content must be non-empty for system
/// and user roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }
}

/// A fully-specified completion request. The digest is a deterministic
/// function of (messages, params) and keys cassette lookups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub params: GenerationParams,
    pub request_digest: String,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>, params: GenerationParams) -> Self {
        debug_assert!(
            messages
                .iter()
                .all(|m| m.role == ChatRole::Assistant || !m.content.is_empty()),
            "system/user messages must be non-empty"
        );
        let request_digest = digest::request_digest(&messages, &params);
        Self {
            messages,
            params,
            request_digest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    /// The completion hit max_tokens; callers should treat the content as
    /// possibly truncated.
    Length,
    Error,
}

/// A model completion together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub content: String,
    pub finish_reason: FinishReason,
    pub backend_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited after retries exhausted")]
    RateLimited,
    #[error("provider error (status {status}): {message}")]
    Provider { status: u16, message: String },
    #[error("no recording for request digest {0}")]
    MissingRecording(String),
    #[error("scripted backend queue is empty")]
    ScriptExhausted,
    #[error("missing API key: set {0}")]
    MissingCredentials(&'static str),
    #[error("cassette I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("cassette format: {0}")]
    Format(String),
}

/// A chat-completion provider. Implementations must be safe for concurrent
/// `complete` calls.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError>;

    /// Short identifier stamped into completions and run records.
    fn id(&self) -> String;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        (**self).complete(request)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        (**self).complete(request)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}
