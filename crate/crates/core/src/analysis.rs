//! Turns one model's scores over a corpus into metric rows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Origin, SentenceInstance};
use crate::metrics::{
    group_score_sense, label_dist, label_flip_rate, score_dev, score_sense, MetricError, PairedScores,
};
use crate::report::MetricRow;
use crate::scoring::{binarize, BiasDirection, ModelDescriptor};
use crate::stats::{paired_t_test, welch_t_test, Significance, StatsError, TTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestVariant {
    /// Pooled group scores against pooled control scores.
    #[default]
    Welch,
    /// Each perturbed score against its own control.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub threshold: f64,
    pub test: TestVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTermRow {
    pub model_id: String,
    pub group_id: String,
    pub term_id: String,
    pub score_sense: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTemplateRow {
    pub model_id: String,
    pub template_id: String,
    pub group_id: String,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAnalysis {
    pub model_id: String,
    pub corpus_fingerprint: String,
    pub rows: Vec<MetricRow>,
    pub per_term: Vec<PerTermRow>,
    pub per_template: Vec<PerTemplateRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    MissingScore { sentence_id: String },
    MissingControl { sentence_id: String, control_id: String },
    Metric { group_id: String, source: MetricError },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::MissingScore { sentence_id } => write!(f, "no score for sentence {sentence_id}"),
            AnalysisError::MissingControl { sentence_id, control_id } => {
                write!(f, "sentence {sentence_id} references unknown control {control_id}")
            }
            AnalysisError::Metric { group_id, source } => write!(f, "group {group_id}: {source}"),
        }
    }
}

impl core::error::Error for AnalysisError {}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Outcome of the significance test, tolerating degenerate samples: with too
/// few points or no variance at all, `t` is undefined and p is 1 when the
/// means agree and 0 when they differ.
fn significance_test(perturbed: &[f64], controls: &[f64], pair_controls: &[f64], variant: TestVariant) -> (Option<f64>, f64) {
    let result: Result<TTest, StatsError> = match variant {
        TestVariant::Welch => welch_t_test(perturbed, controls),
        TestVariant::Paired => paired_t_test(perturbed, pair_controls),
    };
    match result {
        Ok(test) => (Some(test.t), test.p),
        Err(_) => {
            let (a, b) = match variant {
                TestVariant::Welch => (perturbed, controls),
                TestVariant::Paired => (perturbed, pair_controls),
            };
            let enough = a.len() >= 2 && b.len() >= 2;
            let differs = !a.is_empty() && !b.is_empty() && mean(a) != mean(b);
            (None, if enough && differs { 0.0 } else { 1.0 })
        }
    }
}

struct GroupData<'a> {
    group_id: &'a str,
    terms: Vec<&'a str>,
    /// term → instances in corpus order
    by_term: BTreeMap<&'a str, Vec<&'a SentenceInstance>>,
}

/// Computes every metric for every group present in `instances`.
///
/// Groups come out in `group_order` first, then any remaining groups in
/// order of first appearance; terms follow first appearance in the corpus.
/// `scores` maps sentence ids to canonical-range scores for this model.
pub fn analyze_model(
    instances: &[SentenceInstance],
    scores: &BTreeMap<String, f64>,
    model: &ModelDescriptor,
    corpus_fingerprint: &str,
    group_order: &[String],
    options: &AnalysisOptions,
) -> Result<ModelAnalysis, AnalysisError> {
    let score_of = |inst: &SentenceInstance| {
        scores
            .get(&inst.sentence_id)
            .copied()
            .ok_or_else(|| AnalysisError::MissingScore { sentence_id: inst.sentence_id.clone() })
    };
    let direction = model.direction();
    let label = |s: f64| binarize(s, options.threshold, direction);

    let controls: BTreeMap<&str, &SentenceInstance> = instances
        .iter()
        .filter(|i| i.is_control())
        .map(|i| (i.sentence_id.as_str(), i))
        .collect();

    let mut groups: Vec<GroupData> = group_order
        .iter()
        .map(|g| GroupData { group_id: g.as_str(), terms: Vec::new(), by_term: BTreeMap::new() })
        .collect();
    for inst in instances.iter().filter(|i| !i.is_control()) {
        let (Some(group_id), Some(term_id)) = (inst.group_id.as_deref(), inst.term_id.as_deref()) else {
            continue;
        };
        if !controls.contains_key(inst.control_id.as_str()) {
            return Err(AnalysisError::MissingControl {
                sentence_id: inst.sentence_id.clone(),
                control_id: inst.control_id.clone(),
            });
        }
        let idx = match groups.iter().position(|g| g.group_id == group_id) {
            Some(i) => i,
            None => {
                groups.push(GroupData { group_id, terms: Vec::new(), by_term: BTreeMap::new() });
                groups.len() - 1
            }
        };
        let group = &mut groups[idx];
        let bucket = group.by_term.entry(term_id).or_default();
        if bucket.is_empty() {
            group.terms.push(term_id);
        }
        bucket.push(inst);
    }

    let mut rows = Vec::new();
    let mut per_term = Vec::new();
    for group in groups.iter().filter(|g| !g.terms.is_empty()) {
        let metric_err = |source| AnalysisError::Metric { group_id: group.group_id.to_string(), source };

        let mut term_sense = Vec::with_capacity(group.terms.len());
        let mut perturbed_all = Vec::new();
        let mut pair_controls = Vec::new();
        let mut control_labels = Vec::new();
        let mut perturbed_labels = Vec::new();
        let mut control_ids_seen = BTreeSet::new();
        let mut control_sample = Vec::new();
        // context → term index → perturbed score
        let mut matrix: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
        let mut context_order: Vec<&str> = Vec::new();
        let mut term_flagged: Vec<BTreeSet<&str>> = Vec::new();
        let mut control_flagged_per_term: Vec<BTreeSet<&str>> = Vec::new();

        for (term_idx, term_id) in group.terms.iter().enumerate() {
            let mut paired = PairedScores {
                group_id: group.group_id.to_string(),
                term_id: term_id.to_string(),
                pairs: Vec::new(),
                labels: Vec::new(),
            };
            let mut flagged = BTreeSet::new();
            let mut control_flagged = BTreeSet::new();
            for inst in &group.by_term[term_id] {
                let control = controls[inst.control_id.as_str()];
                let control_score = score_of(control)?;
                let score = score_of(inst)?;
                let (cl, pl) = (label(control_score), label(score));
                paired.pairs.push((control_score, score));
                paired.labels.push((cl, pl));

                let context = inst.control_id.as_str();
                if cl == 1 {
                    control_flagged.insert(context);
                }
                if pl == 1 {
                    flagged.insert(context);
                }
                if control_ids_seen.insert(context) {
                    control_sample.push(control_score);
                }
                let row = matrix.entry(context).or_insert_with(|| {
                    context_order.push(context);
                    alloc::vec![None; group.terms.len()]
                });
                if row[term_idx].is_none() {
                    row[term_idx] = Some(score);
                }
            }
            let sense = score_sense(&paired).map_err(metric_err)?;
            per_term.push(PerTermRow {
                model_id: model.model_id.clone(),
                group_id: group.group_id.to_string(),
                term_id: term_id.to_string(),
                score_sense: sense,
                n_pairs: paired.pairs.len(),
            });
            term_sense.push(sense);
            for (&(c, p), &(cl, pl)) in paired.pairs.iter().zip(&paired.labels) {
                perturbed_all.push(p);
                pair_controls.push(c);
                control_labels.push(cl);
                perturbed_labels.push(pl);
            }
            term_flagged.push(flagged);
            control_flagged_per_term.push(control_flagged);
        }

        let group_sense = group_score_sense(&term_sense).map_err(metric_err)?;

        let complete_rows: Vec<Vec<f64>> = context_order
            .iter()
            .filter_map(|c| matrix[c].iter().copied().collect::<Option<Vec<f64>>>())
            .collect();
        let dev = match score_dev(&complete_rows) {
            Ok(v) => Some(v),
            Err(MetricError::SingleColumn | MetricError::EmptyInput) => None,
            Err(e) => return Err(metric_err(e)),
        };

        let dist = if term_flagged.is_empty() {
            0.0
        } else {
            let per_term_dist: Vec<f64> = control_flagged_per_term
                .iter()
                .zip(&term_flagged)
                .map(|(a, b)| label_dist(a, core::slice::from_ref(b)))
                .collect();
            mean(&per_term_dist)
        };
        let flip = label_flip_rate(&control_labels, &perturbed_labels).map_err(metric_err)?;

        let (t_stat, p_value) = significance_test(&perturbed_all, &control_sample, &pair_controls, options.test);
        let significance = Significance::from_p(p_value);
        let bias_indicated = significance != Significance::None
            && match direction {
                BiasDirection::NegativeIsBiased => group_sense < 0.0,
                BiasDirection::PositiveIsBiased => group_sense > 0.0,
            };

        rows.push(MetricRow {
            model_id: model.model_id.clone(),
            group_id: group.group_id.to_string(),
            n_pairs: perturbed_all.len(),
            score_sense: group_sense,
            score_dev: dev,
            label_dist: dist,
            label_flip_rate: flip,
            mean_score: mean(&perturbed_all),
            t_stat,
            p_value,
            significance,
            bias_indicated,
        });
    }

    let per_template = per_template_means(instances, scores, model, &groups)?;
    Ok(ModelAnalysis {
        model_id: model.model_id.clone(),
        corpus_fingerprint: corpus_fingerprint.to_string(),
        rows,
        per_term,
        per_template,
    })
}

fn per_template_means(
    instances: &[SentenceInstance],
    scores: &BTreeMap<String, f64>,
    model: &ModelDescriptor,
    groups: &[GroupData],
) -> Result<Vec<PerTemplateRow>, AnalysisError> {
    let mut template_order: Vec<&str> = Vec::new();
    let mut sums: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for inst in instances.iter().filter(|i| i.origin == Origin::Template && !i.is_control()) {
        let (Some(template_id), Some(group_id)) = (inst.template_id.as_deref(), inst.group_id.as_deref()) else {
            continue;
        };
        let score = *scores
            .get(&inst.sentence_id)
            .ok_or_else(|| AnalysisError::MissingScore { sentence_id: inst.sentence_id.clone() })?;
        if !template_order.contains(&template_id) {
            template_order.push(template_id);
        }
        let entry = sums.entry((template_id, group_id)).or_insert((0.0, 0));
        entry.0 += score;
        entry.1 += 1;
    }
    let mut out = Vec::new();
    for template_id in template_order {
        for group in groups {
            if let Some(&(sum, n)) = sums.get(&(template_id, group.group_id)) {
                out.push(PerTemplateRow {
                    model_id: model.model_id.clone(),
                    template_id: template_id.to_string(),
                    group_id: group.group_id.to_string(),
                    mean_score: sum / n as f64,
                });
            }
        }
    }
    Ok(out)
}
