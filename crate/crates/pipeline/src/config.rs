//! Run configuration: a TOML file plus environment overrides.
//!
//! ```toml
//! [paths]
//! events = "events.toml"        # default: built-in registry
//! gazetteer = "gazetteer.tsv"   # required by `curate`
//! keywords = "keywords.toml"    # default: built-in bank
//! taxonomy = "taxonomy.toml"    # default: built-in categories
//!
//! [ingest]
//! feed_base = "https://news.google.com/rss/search"
//! locale = "en-US"
//! window_days = 31
//! workers = 8
//! politeness_ms = 1000
//!
//! [llm]
//! endpoint = "http://localhost:8000/v1"
//! model = "Qwen2.5-32B-Instruct"
//! temperature = 0.7
//! max_tokens = 1024
//! max_retries = 3
//! backoff_base_ms = 2000
//! in_flight = 4
//! requests_per_second = 2.0
//!
//! [embedding]
//! endpoint = "http://localhost:8001/v1"
//! model = "text-embedding"
//!
//! [split]
//! train = 0.7
//! val = 0.15
//! test = 0.15
//! seed = 3407
//! ```
//!
//! Relative paths resolve against the config file's directory.
//! `EWRA_LLM_ENDPOINT`, `EWRA_LLM_KEY` and `EWRA_HTTP_PROXY` override the file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use ewra_core::curriculum::SplitSpec;
use ewra_core::ingest::{DEFAULT_FEED_BASE, DEFAULT_WINDOW_DAYS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_LLM_ENDPOINT: &str = "EWRA_LLM_ENDPOINT";
pub const ENV_LLM_KEY: &str = "EWRA_LLM_KEY";
pub const ENV_HTTP_PROXY: &str = "EWRA_HTTP_PROXY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub events: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub feed_base: String,
    pub locale: String,
    pub window_days: i64,
    pub workers: usize,
    pub politeness_ms: u64,
    pub timeout_secs: u64,
    pub user_agent: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            feed_base: DEFAULT_FEED_BASE.into(),
            locale: "en-US".into(),
            window_days: DEFAULT_WINDOW_DAYS,
            workers: 8,
            politeness_ms: 1000,
            timeout_secs: 30,
            user_agent: concat!("ewra/", env!("CARGO_PKG_VERSION")).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub system_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Total attempts per request, and per sentence for malformed output.
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub in_flight: usize,
    /// Token-bucket refill rate; unlimited when absent.
    pub requests_per_second: Option<f64>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: None,
            api_key: None,
            model: "Qwen2.5-32B-Instruct".into(),
            system_prompt: "You are a helpful assistant.".into(),
            temperature: 0.7,
            max_tokens: 1024,
            timeout_secs: 120,
            max_retries: 3,
            backoff_base_ms: 2000,
            in_flight: 4,
            requests_per_second: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitConfig { train: s.train_frac, val: s.val_frac, test: s.test_frac, seed: s.seed }
    }
}

impl SplitConfig {
    pub fn spec(&self) -> SplitSpec {
        SplitSpec { train_frac: self.train, val_frac: self.val, test_frac: self.test, seed: self.seed }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub paths: Paths,
    pub ingest: IngestConfig,
    pub llm: LlmConfig,
    pub embedding: EmbeddingConfig,
    pub split: SplitConfig,
    pub http_proxy: Option<String>,
}

impl Config {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: base.to_path_buf(), message: e.to_string() })?;
        let dir = base.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.paths.events, &mut cfg.paths.gazetteer, &mut cfg.paths.keywords, &mut cfg.paths.taxonomy]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Loads `path` (or defaults), applies the environment, and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
                Self::from_toml_str(&text, p)?
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        let nonempty = |k| get(k).filter(|v: &String| !v.trim().is_empty());
        if let Some(v) = nonempty(ENV_LLM_ENDPOINT) {
            self.llm.endpoint = Some(v);
        }
        if let Some(v) = nonempty(ENV_LLM_KEY) {
            self.llm.api_key = Some(v);
        }
        if let Some(v) = nonempty(ENV_HTTP_PROXY) {
            self.http_proxy = Some(v);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.paths;
        for (key, path) in [
            ("paths.events", &p.events),
            ("paths.gazetteer", &p.gazetteer),
            ("paths.keywords", &p.keywords),
            ("paths.taxonomy", &p.taxonomy),
        ] {
            if let Some(path) = path {
                if !path.is_file() {
                    return Err(invalid(key, format!("{} does not exist", path.display())));
                }
            }
        }
        if self.ingest.window_days < 0 {
            return Err(invalid("ingest.window_days", "must be non-negative"));
        }
        if self.ingest.workers == 0 {
            return Err(invalid("ingest.workers", "must be at least 1"));
        }
        url::Url::parse(&self.ingest.feed_base).map_err(|e| invalid("ingest.feed_base", e.to_string()))?;
        if let Some(e) = &self.llm.endpoint {
            url::Url::parse(e).map_err(|err| invalid("llm.endpoint", err.to_string()))?;
        }
        if let Some(e) = &self.embedding.endpoint {
            url::Url::parse(e).map_err(|err| invalid("embedding.endpoint", err.to_string()))?;
        }
        if let Some(proxy) = &self.http_proxy {
            url::Url::parse(proxy).map_err(|err| invalid("http_proxy", err.to_string()))?;
        }
        if self.llm.max_retries == 0 {
            return Err(invalid("llm.max_retries", "must be at least 1"));
        }
        if self.llm.in_flight == 0 {
            return Err(invalid("llm.in_flight", "must be at least 1"));
        }
        if !(0.0..=2.0).contains(&self.llm.temperature) {
            return Err(invalid("llm.temperature", "must lie in [0, 2]"));
        }
        if let Some(r) = self.llm.requests_per_second {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid("llm.requests_per_second", "must be positive"));
            }
        }
        self.split.spec().validate().map_err(|e| invalid("split", e.to_string()))?;
        Ok(())
    }

    pub fn llm_timeout(&self) -> Duration {
        Duration::from_secs(self.llm.timeout_secs)
    }
}
