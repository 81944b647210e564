//! Builtin lexicon scorer.
//!
//! Tokens are looked up in a valence table; a token directly preceded by
//! "not" has its valence negated; the score is the mean of matched valences
//! (0.0 when nothing matches). The shipped table covers the emotion and
//! event words of the default lexicon plus a handful of common sentiment
//! words and deliberately leaves every group term unvalenced, so on the
//! default corpus it behaves as an unbiased reference scorer.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::text::tokenize;

const DEFAULT_VALENCES: &[(&str, f64)] = &[
    // anger
    ("aggravated", -0.6),
    ("enraged", -0.8),
    ("outraged", -0.7),
    ("vexing", -0.5),
    ("wrathful", -0.7),
    ("outraging", -0.7),
    // disgust
    ("repulsed", -0.7),
    ("disgusted", -0.7),
    ("revulsed", -0.7),
    ("disapproving", -0.4),
    ("nauseating", -0.6),
    ("disgusting", -0.8),
    // fear
    ("frightened", -0.6),
    ("alarmed", -0.5),
    ("panicked", -0.6),
    ("alarming", -0.5),
    ("forbidding", -0.4),
    ("dreadful", -0.8),
    // happy
    ("elated", 0.8),
    ("delightful", 0.8),
    ("happy", 0.8),
    ("wonderful", 0.9),
    ("pleasing", 0.6),
    ("joyful", 0.8),
    // sad
    ("gloomy", -0.5),
    ("melancholic", -0.5),
    ("dejected", -0.6),
    ("heartbreaking", -0.8),
    ("saddening", -0.6),
    ("depressing", -0.7),
    // surprise (+)
    ("excited", 0.6),
    ("ecstatic", 0.9),
    ("amazed", 0.7),
    ("stunning", 0.7),
    ("exciting", 0.7),
    ("amazing", 0.8),
    // surprise (-)
    ("shocked", -0.5),
    ("startled", -0.3),
    ("attacked", -0.7),
    ("shocking", -0.6),
    ("jarring", -0.4),
    ("startling", -0.3),
    // general
    ("love", 0.7),
    ("beautiful", 0.8),
    ("nice", 0.5),
    ("bad", -0.6),
    ("hate", -0.8),
    ("terrible", -0.8),
    ("awful", -0.8),
    ("sad", -0.6),
    ("angry", -0.6),
];

/// Word → valence in `[-1, 1]`. Keys are lowercase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValenceTable {
    entries: BTreeMap<String, f64>,
}

impl Default for ValenceTable {
    fn default() -> Self {
        DEFAULT_VALENCES.iter().map(|&(w, v)| (w.to_string(), v)).collect()
    }
}

impl FromIterator<(String, f64)> for ValenceTable {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        ValenceTable {
            entries: iter.into_iter().map(|(w, v)| (w.to_lowercase(), v)).collect(),
        }
    }
}

impl ValenceTable {
    pub fn empty() -> Self {
        ValenceTable { entries: BTreeMap::new() }
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn insert(&mut self, word: &str, valence: f64) {
        self.entries.insert(word.to_lowercase(), valence);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First entry whose valence lies outside `[-1, 1]` or is not finite.
    pub fn invalid_entry(&self) -> Option<(&str, f64)> {
        self.entries
            .iter()
            .find(|(_, v)| !(v.is_finite() && (-1.0..=1.0).contains(*v)))
            .map(|(w, v)| (w.as_str(), *v))
    }

    /// Scores `text` in `[-1, 1]`.
    pub fn score(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let mut sum = 0.0;
        let mut matched = 0usize;
        for (i, token) in tokens.iter().enumerate() {
            if let Some(v) = self.get(token) {
                let negated = i > 0 && tokens[i - 1] == "not";
                sum += if negated { -v } else { v };
                matched += 1;
            }
        }
        if matched == 0 {
            0.0
        } else {
            sum / matched as f64
        }
    }
}

/// Scores `text` with the shipped valence table.
pub fn builtin_lexicon_score(text: &str) -> f64 {
    ValenceTable::default().score(text)
}
