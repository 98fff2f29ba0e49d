//! TOML-backed configuration. Every knob has a default; the CLI layers
//! flag overrides on top (flag > file > default).

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::IngestOptions;
use crate::executor::ExecLimits;
use crate::gateway::{LiveConfig, RetryPolicy};
use crate::model::{GenerationParams, LoopConfig, Preset};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub base_url: String,
    /// Optional separate model for the role-playing judge stages; the
    /// generator model is used when unset.
    pub judge_name: Option<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "gpt-3.5-turbo".into(),
            base_url: "https://api.openai.com/v1".into(),
            judge_name: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorConfig {
    /// Language tag used both to select oracle solutions at ingestion and
    /// to run generated programs.
    pub language: String,
    pub max_output_bytes: usize,
    /// Extra `language_tag -> argv template` entries merged over the
    /// built-in python mapping.
    pub interpreters: HashMap<String, Vec<String>>,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            language: "python3".into(),
            max_output_bytes: 1024 * 1024,
            interpreters: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Presets {
    pub code: PresetParams,
    pub text: PresetParams,
}

impl Default for Presets {
    fn default() -> Self {
        Self {
            code: PresetParams {
                temperature: 0.2,
                top_p: 0.1,
                max_tokens: 2048,
            },
            text: PresetParams {
                temperature: 0.7,
                top_p: 0.8,
                max_tokens: 2048,
            },
        }
    }
}

impl Default for PresetParams {
    fn default() -> Self {
        Presets::default().code
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_factor: f64,
    pub jitter: f64,
    pub max_inflight: usize,
    pub request_timeout_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff_ms: 500,
            backoff_factor: 2.0,
            jitter: 0.2,
            max_inflight: 4,
            request_timeout_ms: 120_000,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub image_markers: Option<Vec<String>>,
}

/// Whole-engine configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeConfig {
    pub model: ModelConfig,
    pub loops: LoopConfig,
    pub executor: ExecutorConfig,
    pub presets: Presets,
    pub gateway: GatewayConfig,
    pub ingest: IngestConfig,
}

impl ForgeConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config
            .loops
            .validate()
            .map_err(ConfigError::Invalid)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn code_params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.presets.code.temperature,
            top_p: self.presets.code.top_p,
            max_tokens: self.presets.code.max_tokens,
            preset: Preset::Code,
        }
    }

    pub fn text_params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.presets.text.temperature,
            top_p: self.presets.text.top_p,
            max_tokens: self.presets.text.max_tokens,
            preset: Preset::Text,
        }
    }

    pub fn exec_limits(&self) -> ExecLimits {
        ExecLimits {
            per_test_timeout_ms: self.loops.per_test_timeout_ms,
            max_output_bytes: self.executor.max_output_bytes,
        }
    }

    pub fn ingest_options(&self) -> IngestOptions {
        let defaults = IngestOptions::default();
        IngestOptions {
            image_markers: self
                .ingest
                .image_markers
                .clone()
                .unwrap_or(defaults.image_markers),
            language_tag: self.executor.language.clone(),
        }
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.gateway.max_attempts,
            initial_backoff_ms: self.gateway.initial_backoff_ms,
            backoff_factor: self.gateway.backoff_factor,
            jitter: self.gateway.jitter,
        }
    }

    pub fn live_config(&self) -> LiveConfig {
        LiveConfig {
            model: self.model.name.clone(),
            base_url: self.model.base_url.clone(),
            retry: self.retry_policy(),
            max_inflight: self.gateway.max_inflight,
            request_timeout_ms: self.gateway.request_timeout_ms,
        }
    }

    /// Live config for the judge stages (same as the generator unless a
    /// judge model is configured).
    pub fn judge_live_config(&self) -> LiveConfig {
        let mut config = self.live_config();
        if let Some(judge) = &self.model.judge_name {
            config.model = judge.clone();
        }
        config
    }
}
