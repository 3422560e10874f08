use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::HttpBackendConfig;
use crate::rag::ChunkParams;
use crate::scalar::Scalar;
use crate::sva::ExternalCheckerConfig;
use crate::tree::SearchParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSettings {
    pub kind: BackendKind,
    /// Script file for the scripted backend.
    pub script: Option<PathBuf>,
    #[serde(flatten)]
    pub http: HttpBackendConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerKind {
    #[default]
    Builtin,
    External,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckerSettings {
    pub kind: CheckerKind,
    /// Builtin only: warn on identifiers that are not bank signals.
    pub known_signals: bool,
    #[serde(flatten)]
    pub external: ExternalCheckerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RagSettings {
    pub index: Option<PathBuf>,
    pub k: usize,
    #[serde(flatten)]
    pub chunking: ChunkParams,
    pub dimension: usize,
}

impl Default for RagSettings {
    fn default() -> Self {
        Self { index: None, k: 4, chunking: ChunkParams::default(), dimension: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathSettings {
    pub bank: PathBuf,
    pub out: PathBuf,
    /// Directory of `<template>.txt` overrides.
    pub templates: Option<PathBuf>,
}

impl Default for PathSettings {
    fn default() -> Self {
        Self { bank: PathBuf::from("out/bank.json"), out: PathBuf::from("out"), templates: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "S: Scalar")]
pub struct RunConfig<S> {
    pub search: SearchParams<S>,
    pub backend: BackendSettings,
    pub checker: CheckerSettings,
    pub rag: RagSettings,
    pub paths: PathSettings,
    pub early_stop: bool,
    /// Minimum suppressed score of the best node for an early stop.
    pub early_stop_score: S,
    /// Defaults to `2 + 4 * n_rollouts + 2`.
    pub max_api_calls_per_signal: Option<u32>,
    pub parallel: usize,
}

impl<S: Scalar> Default for RunConfig<S> {
    fn default() -> Self {
        Self {
            search: SearchParams::default(),
            backend: BackendSettings::default(),
            checker: CheckerSettings::default(),
            rag: RagSettings::default(),
            paths: PathSettings::default(),
            early_stop: true,
            early_stop_score: S::lit(90.0),
            max_api_calls_per_signal: None,
            parallel: 1,
        }
    }
}

/// Calls per signal: weak answer and its score, four per rollout, then
/// correction and deduplication.
pub fn max_calls_for(n_rollouts: u32) -> u32 {
    2 + 4 * n_rollouts + 2
}

const SECRET_KEYS: &[&str] = &["api_key", "apikey", "key", "token", "secret", "password"];

fn secret_key_path(table: &toml::Table, prefix: &str) -> Option<String> {
    table.iter().find_map(|(k, v)| {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        if SECRET_KEYS.contains(&k.to_ascii_lowercase().as_str()) {
            return Some(path);
        }
        v.as_table().and_then(|t| secret_key_path(t, &path))
    })
}

impl<S: Scalar> RunConfig<S> {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let value: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(path) = secret_key_path(&value, "") {
            return Err(ConfigError::Invalid(format!(
                "`{path}` is not allowed; the API key is read from the environment variable named by backend.api_key_env"
            )));
        }
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Invalid(m) => ConfigError::Read { path: path.display().to_string(), message: m },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.search.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_api_calls_per_signal == Some(0) {
            return Err(ConfigError::Invalid("max_api_calls_per_signal must be positive".into()));
        }
        if self.parallel == 0 {
            return Err(ConfigError::Invalid("parallel must be at least 1".into()));
        }
        if self.rag.k == 0 || self.rag.dimension == 0 {
            return Err(ConfigError::Invalid("rag.k and rag.dimension must be positive".into()));
        }
        if self.rag.chunking.overlap >= self.rag.chunking.size {
            return Err(ConfigError::Invalid("rag overlap must be smaller than size".into()));
        }
        if self.checker.kind == CheckerKind::External && self.checker.external.command.trim().is_empty() {
            return Err(ConfigError::Invalid("checker.command is required for the external checker".into()));
        }
        Ok(())
    }

    pub fn max_calls_per_signal(&self) -> u32 {
        self.max_api_calls_per_signal.unwrap_or_else(|| max_calls_for(self.search.n_rollouts))
    }
}
