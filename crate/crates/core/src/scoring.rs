//! Scorer descriptions, score records and the range/threshold rules applied
//! to raw backend output.

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sentiment,
    Toxicity,
}

impl ModelKind {
    /// Range scores are stored in: sentiment `[-1, 1]`, toxicity `[0, 1]`.
    pub fn canonical_range(self) -> ScoreRange {
        match self {
            ModelKind::Sentiment => ScoreRange { lo: -1.0, hi: 1.0 },
            ModelKind::Toxicity => ScoreRange { lo: 0.0, hi: 1.0 },
        }
    }

    pub fn default_direction(self) -> BiasDirection {
        match self {
            ModelKind::Sentiment => BiasDirection::NegativeIsBiased,
            ModelKind::Toxicity => BiasDirection::PositiveIsBiased,
        }
    }

    pub fn default_threshold(self) -> f64 {
        match self {
            ModelKind::Sentiment => 0.0,
            ModelKind::Toxicity => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Builtin,
    Subprocess,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasDirection {
    NegativeIsBiased,
    PositiveIsBiased,
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ScoreRange {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for ScoreRange {
    fn from([lo, hi]: [f64; 2]) -> Self {
        ScoreRange { lo, hi }
    }
}

impl From<ScoreRange> for [f64; 2] {
    fn from(r: ScoreRange) -> Self {
        [r.lo, r.hi]
    }
}

impl ScoreRange {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }

    /// Affine map of `x` from `self` onto `to`.
    pub fn map_to(&self, x: f64, to: &ScoreRange) -> f64 {
        to.lo + (x - self.lo) * (to.hi - to.lo) / (self.hi - self.lo)
    }
}

/// A scorer under audit and how to reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub model_id: String,
    pub kind: ModelKind,
    pub transport: Transport,
    /// Command line (subprocess), base URL (http), or an optional valence
    /// table path (builtin).
    #[serde(default)]
    pub endpoint: String,
    /// Range the backend reports in. Defaults to the kind's canonical range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_range: Option<ScoreRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_direction: Option<BiasDirection>,
    /// Clamp out-of-range scores instead of failing.
    #[serde(default)]
    pub clamp: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Name of an environment variable holding a bearer token (http only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearer_token_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DescriptorError {
    EmptyModelId,
    InvalidRange { model_id: String },
    MissingEndpoint { model_id: String },
    ZeroBatch { model_id: String },
}

impl fmt::Display for DescriptorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptorError::EmptyModelId => f.write_str("model_id must not be empty"),
            DescriptorError::InvalidRange { model_id } => {
                write!(f, "model {model_id:?}: score_range must be finite with lo < hi")
            }
            DescriptorError::MissingEndpoint { model_id } => {
                write!(f, "model {model_id:?}: endpoint is required for this transport")
            }
            DescriptorError::ZeroBatch { model_id } => write!(f, "model {model_id:?}: batch_size must be >= 1"),
        }
    }
}

impl core::error::Error for DescriptorError {}

impl ModelDescriptor {
    pub fn builtin(model_id: impl Into<String>) -> Self {
        ModelDescriptor {
            model_id: model_id.into(),
            kind: ModelKind::Sentiment,
            transport: Transport::Builtin,
            endpoint: String::new(),
            score_range: None,
            bias_direction: None,
            clamp: false,
            batch_size: None,
            bearer_token_env: None,
        }
    }

    pub fn declared_range(&self) -> ScoreRange {
        self.score_range.unwrap_or_else(|| self.kind.canonical_range())
    }

    pub fn direction(&self) -> BiasDirection {
        self.bias_direction.unwrap_or_else(|| self.kind.default_direction())
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.model_id.trim().is_empty() {
            return Err(DescriptorError::EmptyModelId);
        }
        if !self.declared_range().is_valid() {
            return Err(DescriptorError::InvalidRange { model_id: self.model_id.clone() });
        }
        if self.transport != Transport::Builtin && self.endpoint.trim().is_empty() {
            return Err(DescriptorError::MissingEndpoint { model_id: self.model_id.clone() });
        }
        if self.batch_size == Some(0) {
            return Err(DescriptorError::ZeroBatch { model_id: self.model_id.clone() });
        }
        Ok(())
    }

    /// Checks `raw` against the declared range (clamping if enabled) and maps
    /// it onto the canonical range of the model kind. The second element is
    /// the source range when a remapping happened.
    pub fn normalize(&self, raw: f64) -> Result<(f64, Option<ScoreRange>), OutOfRange> {
        let declared = self.declared_range();
        let value = if declared.contains(raw) {
            raw
        } else if self.clamp && !raw.is_nan() {
            raw.clamp(declared.lo, declared.hi)
        } else {
            return Err(OutOfRange { value: raw, range: declared });
        };
        let canonical = self.kind.canonical_range();
        if declared == canonical {
            Ok((value, None))
        } else {
            Ok((declared.map_to(value, &canonical), Some(declared)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutOfRange {
    pub value: f64,
    pub range: ScoreRange,
}

/// One scorer's output for one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sentence_id: String,
    pub model_id: String,
    /// Score on the canonical range of the model kind.
    pub score: f64,
    /// Range the backend reported in, when it differed from the canonical
    /// one. The stored score is the affine image of the raw score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_range: Option<ScoreRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    /// Seconds since the Unix epoch.
    pub scored_at: u64,
}

impl ScoreRecord {
    /// Inverts the stored normalization for a record of the given kind.
    pub fn raw_score(&self, kind: ModelKind) -> f64 {
        match self.raw_range {
            Some(raw) => kind.canonical_range().map_to(self.score, &raw),
            None => self.score,
        }
    }
}

/// Label 1 marks a flagged sentence: strictly below the threshold for
/// negative-is-biased models, strictly above it for positive-is-biased ones.
pub fn binarize(score: f64, threshold: f64, direction: BiasDirection) -> u8 {
    let flagged = match direction {
        BiasDirection::NegativeIsBiased => score < threshold,
        BiasDirection::PositiveIsBiased => score > threshold,
    };
    u8::from(flagged)
}
