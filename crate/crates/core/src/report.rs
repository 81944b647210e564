//! Audit report assembly and markdown rendering.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{ModelAnalysis, PerTemplateRow, PerTermRow, TestVariant};
use crate::scoring::{BiasDirection, ModelKind, Transport};
use crate::stats::Significance;

/// One (model, group) cell of the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model_id: String,
    pub group_id: String,
    pub score_sense: f64,
    /// `None` when the group has a single term.
    pub score_dev: Option<f64>,
    pub label_dist: f64,
    pub label_flip_rate: f64,
    /// Mean perturbed score of the group.
    pub mean_score: f64,
    /// `None` when the test was degenerate.
    pub t_stat: Option<f64>,
    pub p_value: f64,
    pub significance: Significance,
    pub bias_indicated: bool,
    pub n_pairs: usize,
}

/// How one model was configured, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEcho {
    pub model_id: String,
    pub kind: ModelKind,
    pub transport: Transport,
    pub threshold: f64,
    pub bias_direction: BiasDirection,
}

/// Everything about the run that is not a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub corpus_fingerprint: String,
    pub models: Vec<ModelEcho>,
    pub group_order: Vec<String>,
    pub test: TestVariant,
    pub generated_at: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Fixed computation choices, recorded so a report is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub models: Vec<ModelEcho>,
    pub group_order: Vec<String>,
    pub test: TestVariant,
    pub deviation: String,
    pub group_aggregation: String,
    pub empty_jaccard: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub toolkit_version: String,
    pub corpus_fingerprint: String,
    pub config_echo: ConfigEcho,
    pub rows: Vec<MetricRow>,
    pub per_term: Vec<PerTermRow>,
    pub per_template: Vec<PerTemplateRow>,
    pub generated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportError {
    FingerprintMismatch { model_id: String, expected: String, found: String },
    UnknownModel(String),
    DuplicateModel(String),
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::FingerprintMismatch { model_id, expected, found } => write!(
                f,
                "scores for model {model_id} were computed on corpus {found}, expected {expected}"
            ),
            ReportError::UnknownModel(m) => write!(f, "model {m} is not in the run configuration"),
            ReportError::DuplicateModel(m) => write!(f, "model {m} analysed twice"),
        }
    }
}

impl core::error::Error for ReportError {}

/// Merges per-model analyses into one report. Rows follow the configured
/// model order, then each analysis' group order. Every analysis must have
/// been computed on the corpus named in `meta`.
pub fn build_report(analyses: Vec<ModelAnalysis>, meta: ReportMeta) -> Result<AuditReport, ReportError> {
    let mut slots: Vec<Option<ModelAnalysis>> = meta.models.iter().map(|_| None).collect();
    for analysis in analyses {
        if analysis.corpus_fingerprint != meta.corpus_fingerprint {
            return Err(ReportError::FingerprintMismatch {
                model_id: analysis.model_id,
                expected: meta.corpus_fingerprint.clone(),
                found: analysis.corpus_fingerprint,
            });
        }
        let idx = meta
            .models
            .iter()
            .position(|m| m.model_id == analysis.model_id)
            .ok_or_else(|| ReportError::UnknownModel(analysis.model_id.clone()))?;
        if slots[idx].is_some() {
            return Err(ReportError::DuplicateModel(analysis.model_id));
        }
        slots[idx] = Some(analysis);
    }
    let (mut rows, mut per_term, mut per_template) = (Vec::new(), Vec::new(), Vec::new());
    for analysis in slots.into_iter().flatten() {
        rows.extend(analysis.rows);
        per_term.extend(analysis.per_term);
        per_template.extend(analysis.per_template);
    }
    Ok(AuditReport {
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
        corpus_fingerprint: meta.corpus_fingerprint,
        config_echo: ConfigEcho {
            models: meta.models,
            group_order: meta.group_order,
            test: meta.test,
            deviation: "population".into(),
            group_aggregation: "unweighted_mean_over_terms".into(),
            empty_jaccard: 0.0,
            notes: meta.notes,
        },
        rows,
        per_term,
        per_template,
        generated_at: meta.generated_at,
    })
}

/// Two decimals with the significance marker appended, e.g. `-0.25**`.
/// Negative zero prints as `0.00`.
pub fn format_cell(value: f64, significance: Significance) -> String {
    let mut s = format!("{value:.2}");
    if s == "-0.00" {
        s.remove(0);
    }
    s.push_str(significance.marker());
    s
}

fn fmt2(value: f64) -> String {
    format_cell(value, Significance::None)
}

impl AuditReport {
    fn model_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !ids.contains(&row.model_id.as_str()) {
                ids.push(&row.model_id);
            }
        }
        ids
    }

    fn group_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.config_echo.group_order.iter().map(String::as_str).collect();
        for row in &self.rows {
            if !ids.contains(&row.group_id.as_str()) {
                ids.push(&row.group_id);
            }
        }
        ids.retain(|g| self.rows.iter().any(|r| r.group_id == *g));
        ids
    }

    fn row(&self, model: &str, group: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.model_id == model && r.group_id == group)
    }

    /// Human-readable rendering: one table per metric pivoted by model and
    /// group, then the per-term and per-template breakdowns.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let models = self.model_ids();
        let groups = self.group_ids();
        let _ = writeln!(out, "# Audit report\n");
        let _ = writeln!(out, "- toolkit version: {}", self.toolkit_version);
        let _ = writeln!(out, "- corpus fingerprint: `{}`", self.corpus_fingerprint);
        let test = match self.config_echo.test {
            TestVariant::Welch => "Welch two-sample t-test",
            TestVariant::Paired => "paired t-test",
        };
        let _ = writeln!(out, "- significance: {test}, `*` p < 0.01, `**` p < 0.001");
        for note in &self.config_echo.notes {
            let _ = writeln!(out, "- note: {note}");
        }

        type Cell = fn(&MetricRow) -> String;
        let tables: [(&str, Cell); 5] = [
            ("ScoreSense", |r| format_cell(r.score_sense, r.significance)),
            ("ScoreDev", |r| r.score_dev.map_or_else(|| "n/a".into(), fmt2)),
            ("LabelDist", |r| fmt2(r.label_dist)),
            ("Label flip rate", |r| fmt2(r.label_flip_rate)),
            ("Mean score", |r| fmt2(r.mean_score)),
        ];
        for (title, cell) in tables {
            let _ = writeln!(out, "\n## {title}\n");
            let _ = write!(out, "| model |");
            for g in &groups {
                let _ = write!(out, " {g} |");
            }
            let _ = write!(out, "\n|---|");
            for _ in &groups {
                out.push_str("---:|");
            }
            out.push('\n');
            for m in &models {
                let _ = write!(out, "| {m} |");
                for g in &groups {
                    let text = self.row(m, g).map_or_else(|| "".into(), cell);
                    let _ = write!(out, " {text} |");
                }
                out.push('\n');
            }
        }

        if !self.per_term.is_empty() {
            let _ = writeln!(out, "\n## Per-term ScoreSense\n");
            let _ = writeln!(out, "| model | group | term | ScoreSense | pairs |\n|---|---|---|---:|---:|");
            for r in &self.per_term {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    r.model_id,
                    r.group_id,
                    r.term_id,
                    fmt2(r.score_sense),
                    r.n_pairs
                );
            }
        }
        if !self.per_template.is_empty() {
            let _ = writeln!(out, "\n## Per-template mean score\n");
            let _ = writeln!(out, "| model | template | group | mean |\n|---|---|---|---:|");
            for r in &self.per_template {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    r.model_id,
                    r.template_id,
                    r.group_id,
                    fmt2(r.mean_score)
                );
            }
        }
        out
    }
}
