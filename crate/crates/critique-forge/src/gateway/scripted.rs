//! Deterministic queue-fed backend for tests and fixtures.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::{ChatBackend, ChatRequest, Completion, FinishReason, GatewayError};

/// Pops one pre-loaded completion per request, in load order, regardless of
/// request content. An empty queue yields [`GatewayError::ScriptExhausted`].
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }

    pub fn push(&self, response: impl Into<String>) {
        self.queue.lock().unwrap().push_back(response.into());
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, _request: &ChatRequest) -> Result<Completion, GatewayError> {
        let content = self
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(GatewayError::ScriptExhausted)?;
        Ok(Completion {
            content,
            finish_reason: FinishReason::Stop,
            backend_id: self.id(),
            latency_ms: 0,
        })
    }

    fn id(&self) -> String {
        "scripted".into()
    }
}
