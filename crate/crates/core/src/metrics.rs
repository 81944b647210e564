//! Perturbation sensitivity metrics.
//!
//! * ScoreSense: mean of `f(x_n) - f(x)` over aligned (control, perturbed)
//!   pairs for one term; a group's value is the unweighted mean over its
//!   terms.
//! * ScoreDev: population standard deviation of the perturbed scores across
//!   a group's terms within each context, averaged over contexts.
//! * LabelDist: Jaccard distance between the set of contexts flagged on the
//!   control and the set flagged after inserting a term, averaged over terms.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricError {
    EmptyInput,
    /// Deviation across terms needs at least two terms.
    SingleColumn,
    /// Rows of a score matrix differ in length.
    Ragged,
    LengthMismatch,
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::EmptyInput => f.write_str("empty input"),
            MetricError::SingleColumn => f.write_str("score deviation needs at least two terms"),
            MetricError::Ragged => f.write_str("score matrix rows differ in length"),
            MetricError::LengthMismatch => f.write_str("label lists differ in length"),
        }
    }
}

impl core::error::Error for MetricError {}

/// Aligned `(control_score, perturbed_score)` samples for one term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedScores {
    pub group_id: String,
    pub term_id: String,
    pub pairs: Vec<(f64, f64)>,
    /// Binarized `(control, perturbed)` labels, parallel to `pairs`.
    pub labels: Vec<(u8, u8)>,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n as f64
}

/// Mean of `perturbed - control` over the term's pairs.
pub fn score_sense(paired: &PairedScores) -> Result<f64, MetricError> {
    score_sense_of_pairs(&paired.pairs)
}

pub fn score_sense_of_pairs(pairs: &[(f64, f64)]) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(mean(pairs.iter().map(|(control, perturbed)| perturbed - control)))
}

/// Group ScoreSense: unweighted mean of per-term values.
pub fn group_score_sense(per_term: &[f64]) -> Result<f64, MetricError> {
    if per_term.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(mean(per_term.iter().copied()))
}

/// Population standard deviation. Exactly 0 for constant input.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    libm::sqrt(mean(xs.iter().map(|x| (x - m) * (x - m))))
}

/// Rows are contexts, columns are a group's terms.
pub fn score_dev<R: AsRef<[f64]>>(matrix: &[R]) -> Result<f64, MetricError> {
    let first = matrix.first().ok_or(MetricError::EmptyInput)?.as_ref().len();
    if first == 0 {
        return Err(MetricError::EmptyInput);
    }
    if first == 1 {
        return Err(MetricError::SingleColumn);
    }
    if matrix.iter().any(|r| r.as_ref().len() != first) {
        return Err(MetricError::Ragged);
    }
    Ok(mean(matrix.iter().map(|row| population_std(row.as_ref()))))
}

/// `1 - |A ∩ B| / |A ∪ B|`, with two empty sets at distance 0.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    let intersection = a.intersection(b).count();
    1.0 - intersection as f64 / union as f64
}

/// Mean Jaccard distance between the control flagged set and each term's
/// flagged set. No terms gives 0.
pub fn label_dist<T: Ord, S: Borrow<BTreeSet<T>>>(control_flagged: &BTreeSet<T>, per_term_flagged: &[S]) -> f64 {
    if per_term_flagged.is_empty() {
        return 0.0;
    }
    mean(per_term_flagged.iter().map(|b| jaccard_distance(control_flagged, b.borrow())))
}

/// Fraction of contexts that go from unflagged (0) on the control to flagged
/// (1) after perturbation.
pub fn label_flip_rate(control_labels: &[u8], perturbed_labels: &[u8]) -> Result<f64, MetricError> {
    if control_labels.len() != perturbed_labels.len() {
        return Err(MetricError::LengthMismatch);
    }
    if control_labels.is_empty() {
        return Ok(0.0);
    }
    let flips = control_labels
        .iter()
        .zip(perturbed_labels)
        .filter(|(c, p)| **c == 0 && **p == 1)
        .count();
    Ok(flips as f64 / control_labels.len() as f64)
}
