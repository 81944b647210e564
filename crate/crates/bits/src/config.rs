//! Run configuration (`bits.json`) and its resolution against CLI overrides.

use std::path::{Path, PathBuf};

use bits_core::analysis::TestVariant;
use bits_core::{GenConfig, ModelDescriptor, ModelKind, Transport};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Binarization thresholds by model kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub sentiment: f64,
    pub toxicity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sentiment: ModelKind::Sentiment.default_threshold(),
            toxicity: ModelKind::Toxicity.default_threshold(),
        }
    }
}

impl Thresholds {
    pub fn for_kind(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::Sentiment => self.sentiment,
            ModelKind::Toxicity => self.toxicity,
        }
    }
}

/// Bounded retry with exponential backoff for transient backend failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 4, base_delay_ms: 200 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> std::time::Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(16);
        std::time::Duration::from_millis(self.base_delay_ms.saturating_mul(factor))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Lexicon JSON; the shipped default when absent.
    pub lexicon_path: Option<PathBuf>,
    pub corpus_path: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub models: Vec<ModelDescriptor>,
    pub thresholds: Thresholds,
    pub parallelism: usize,
    pub sampling: GenConfig,
    pub test: TestVariant,
    pub retry: RetryPolicy,
    /// Request timeout for HTTP scorers.
    pub timeout_secs: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lexicon_path: None,
            corpus_path: None,
            cache_path: None,
            output_dir: PathBuf::from("bits-out"),
            models: Vec::new(),
            thresholds: Thresholds::default(),
            parallelism: 1,
            sampling: GenConfig::default(),
            test: TestVariant::Welch,
            retry: RetryPolicy::default(),
            timeout_secs: 30,
        }
    }
}

/// Model id used when no builtin model is configured.
pub const DEFAULT_BUILTIN_ID: &str = "builtin-lexicon";

impl RunConfig {
    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.lexicon_path, &mut self.corpus_path, &mut self.cache_path].into_iter().flatten() {
            join(p);
        }
        join(&mut self.output_dir);
        for model in &mut self.models {
            if model.transport == Transport::Builtin && !model.endpoint.is_empty() {
                let mut p = PathBuf::from(&model.endpoint);
                join(&mut p);
                model.endpoint = p.to_string_lossy().into_owned();
            }
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.corpus_path.clone().unwrap_or_else(|| self.output_dir.join("corpus.jsonl"))
    }

    pub fn cache_path(&self) -> PathBuf {
        self.cache_path.clone().unwrap_or_else(|| self.output_dir.join("scores.jsonl"))
    }

    /// Configured models, or a single default builtin scorer when none are.
    pub fn effective_models(&self) -> Vec<ModelDescriptor> {
        if self.models.is_empty() {
            vec![ModelDescriptor::builtin(DEFAULT_BUILTIN_ID)]
        } else {
            self.models.clone()
        }
    }

    /// Keeps only builtin models. With none left, `effective_models` falls
    /// back to the default builtin scorer.
    pub fn restrict_to_builtin(&mut self) {
        self.models.retain(|m| m.transport == Transport::Builtin);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be >= 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(ConfigError::Invalid("retry.max_attempts must be >= 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for model in &self.models {
            model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if !seen.insert(&model.model_id) {
                return Err(ConfigError::Invalid(format!("duplicate model_id {:?}", model.model_id)));
            }
        }
        for (kind, t) in [(ModelKind::Sentiment, self.thresholds.sentiment), (ModelKind::Toxicity, self.thresholds.toxicity)] {
            if !kind.canonical_range().contains(t) {
                return Err(ConfigError::Invalid(format!("threshold {t} lies outside the {kind:?} score range")));
            }
        }
        Ok(())
    }
}
