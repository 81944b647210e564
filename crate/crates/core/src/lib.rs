//! Pure algorithms behind the `bits` disability-bias audit toolkit.
//!
//! This crate is `no_std` (it needs `alloc`). Everything that touches the
//! filesystem, subprocesses or the network lives in the `bits` crate; this
//! one holds the vocabulary model, corpus generation, the builtin lexicon
//! scorer, the perturbation sensitivity metrics, the t-tests and report
//! assembly.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod corpus;
pub mod lexicon;
pub mod metrics;
pub mod report;
pub mod scoring;
pub mod stats;
pub mod text;
pub mod valence;

pub use analysis::{analyze_model, AnalysisError, AnalysisOptions, ModelAnalysis, PerTemplateRow, PerTermRow, TestVariant};
pub use corpus::{
    instantiate_templates, perturb_document, FormPolicy, GenConfig, NaturalDocument, Origin,
    SeedTerm, SentenceInstance,
};
pub use lexicon::{
    validate_coverage, EmotionLexicon, GroupKind, GroupLexicon, LexiconSet, Placement, Polarity,
    SlotForm, Template, TemplateKind, Term,
};
pub use metrics::{label_dist, label_flip_rate, score_dev, score_sense, MetricError, PairedScores};
pub use report::{build_report, format_cell, AuditReport, MetricRow, ModelEcho, ReportError, ReportMeta};
pub use scoring::{binarize, BiasDirection, ModelDescriptor, ModelKind, ScoreRange, ScoreRecord, Transport};
pub use stats::{welch_t_test, Significance, TTest};

/// The default lexicon configuration (four groups, seven emotion categories,
/// ten templates) as shipped JSON.
pub const DEFAULT_LEXICON_JSON: &str = include_str!("../assets/bits_default.json");

/// Version string echoed into audit reports.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
