//! Live chat-completions backend over HTTP, with bounded concurrency and
//! exponential-backoff retries for transient failures.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::Deserialize;

use crate::util::Semaphore;

use super::{ChatBackend, ChatRequest, Completion, FinishReason, GatewayError};

/// Environment variable holding the API key for the live backend.
pub const API_KEY_ENV: &str = "CRITIQUE_FORGE_API_KEY";

/// Backoff schedule for transient failures: network errors, HTTP 429, and
/// 5xx responses. Other 4xx responses are never retried.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_factor: f64,
    /// Fractional jitter applied symmetrically, e.g. 0.2 for ±20%.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff_ms: 500,
            backoff_factor: 2.0,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based: the delay after the
    /// first failed attempt is `attempt = 1`).
    fn backoff(&self, attempt: u32) -> Duration {
        let base =
            self.initial_backoff_ms as f64 * self.backoff_factor.powi(attempt as i32 - 1);
        let spread = 1.0 + self.jitter * (rand::thread_rng().gen::<f64>() * 2.0 - 1.0);
        Duration::from_millis((base * spread).max(0.0) as u64)
    }

    /// Runs `op` until it succeeds, fails non-transiently, or the attempt
    /// budget is spent. A final rate-limit failure maps to
    /// [`GatewayError::RateLimited`].
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let attempts = self.max_attempts.max(1);
        let mut last_err = None;
        for attempt in 1..=attempts {
            match op() {
                Ok(value) => return Ok(value),
                Err(err) if is_transient(&err) => {
                    if attempt < attempts {
                        std::thread::sleep(self.backoff(attempt));
                    }
                    last_err = Some(err);
                }
                Err(err) => return Err(err),
            }
        }
        match last_err.expect("at least one attempt ran") {
            GatewayError::Provider { status: 429, .. } => Err(GatewayError::RateLimited),
            err => Err(err),
        }
    }
}

fn is_transient(err: &GatewayError) -> bool {
    match err {
        GatewayError::Transport(_) => true,
        GatewayError::Provider { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

/// Connection settings for the live backend.
#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub model: String,
    pub base_url: String,
    pub retry: RetryPolicy,
    pub max_inflight: usize,
    pub request_timeout_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".into(),
            base_url: "https://api.openai.com/v1".into(),
            retry: RetryPolicy::default(),
            max_inflight: 4,
            request_timeout_ms: 120_000,
        }
    }
}

/// HTTP chat-completions backend. Sampling params go on the wire verbatim.
pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    inflight: Semaphore,
}

impl LiveBackend {
    /// Builds a backend with the key from [`API_KEY_ENV`].
    pub fn from_env(config: LiveConfig) -> Result<Self, GatewayError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| GatewayError::MissingCredentials(API_KEY_ENV))?;
        Ok(Self::with_api_key(config, api_key))
    }

    pub fn with_api_key(config: LiveConfig, api_key: String) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build()
            .expect("reqwest client");
        let inflight = Semaphore::new(config.max_inflight);
        Self {
            config,
            api_key,
            client,
            inflight,
        }
    }

    /// JSON body sent to the chat-completions endpoint.
    pub fn wire_payload(&self, request: &ChatRequest) -> serde_json::Value {
        serde_json::json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "max_tokens": request.params.max_tokens,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn send_once(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let started = Instant::now();
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.api_key)
            .json(&self.wire_payload(request))
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;

        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Provider {
                status,
                message: provider_message(&body),
            });
        }

        let parsed: WireResponse = serde_json::from_str(&body).map_err(|e| {
            GatewayError::Provider {
                status,
                message: format!("unparseable completion body: {e}"),
            }
        })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or(GatewayError::Provider {
                status,
                message: "empty choices".into(),
            })?;
        Ok(Completion {
            content: choice.message.content.unwrap_or_default(),
            finish_reason: match choice.finish_reason.as_deref() {
                Some("stop") | None => FinishReason::Stop,
                Some("length") => FinishReason::Length,
                Some(_) => FinishReason::Error,
            },
            backend_id: self.id(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let _slot = self.inflight.acquire();
        self.config.retry.run(|| self.send_once(request))
    }

    fn id(&self) -> String {
        format!("live:{}", self.config.model)
    }
}

fn provider_message(body: &str) -> String {
    #[derive(Deserialize)]
    struct ErrBody {
        error: ErrDetail,
    }
    #[derive(Deserialize)]
    struct ErrDetail {
        message: String,
    }
    serde_json::from_str::<ErrBody>(body)
        .map(|e| e.error.message)
        .unwrap_or_else(|_| body.chars().take(300).collect())
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;
    use crate::model::GenerationParams;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn fast_policy(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            initial_backoff_ms: 1,
            backoff_factor: 1.0,
            jitter: 0.0,
        }
    }

    #[test]
    fn code_preset_rides_the_wire_verbatim() {
        let backend = LiveBackend::with_api_key(LiveConfig::default(), "test-key".into());
        let request = ChatRequest::new(
            vec![ChatMessage::user("solve it")],
            GenerationParams::code(),
        );
        let payload = backend.wire_payload(&request);
        assert_eq!(payload["temperature"], 0.2);
        assert_eq!(payload["top_p"], 0.1);
        assert_eq!(payload["max_tokens"], 2048);
        assert_eq!(payload["messages"][0]["role"], "user");
    }

    #[test]
    fn retry_recovers_from_transient_failures() {
        let calls = AtomicU32::new(0);
        let result = fast_policy(5).run(|| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(GatewayError::Transport("connection reset".into()))
            } else {
                Ok(42)
            }
        });
        assert_eq!(result.unwrap(), 42);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn non_rate_limit_4xx_is_never_retried() {
        let calls = AtomicU32::new(0);
        let result: Result<(), _> = fast_policy(5).run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(GatewayError::Provider {
                status: 400,
                message: "bad request".into(),
            })
        });
        assert!(matches!(
            result,
            Err(GatewayError::Provider { status: 400, .. })
        ));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn exhausted_429_maps_to_rate_limited() {
        let calls = AtomicU32::new(0);
        let result: Result<(), _> = fast_policy(3).run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(GatewayError::Provider {
                status: 429,
                message: "slow down".into(),
            })
        });
        assert!(matches!(result, Err(GatewayError::RateLimited)));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn server_errors_retry_until_budget_spent() {
        let calls = AtomicU32::new(0);
        let result: Result<(), _> = fast_policy(4).run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(GatewayError::Provider {
                status: 503,
                message: "unavailable".into(),
            })
        });
        assert!(matches!(
            result,
            Err(GatewayError::Provider { status: 503, .. })
        ));
        assert_eq!(calls.load(Ordering::SeqCst), 4);
    }
}
