//! The audit stages. Each one reads the previous stage's file and writes its
//! own, so any stage can be re-run on its own.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use bits_core::corpus::{content_fingerprint, expected_counts, CorpusCounts};
use bits_core::report::ModelEcho;
use bits_core::{
    analyze_model, build_report, instantiate_templates, perturb_document, AnalysisOptions, LexiconSet,
    ModelDescriptor, Origin, ReportMeta, SeedTerm, SentenceInstance, Transport,
};
use serde::Serialize;

use crate::cache::ScoreCache;
use crate::config::RunConfig;
use crate::corpus_io::{read_corpus, read_documents, write_corpus, DocumentLayout};
use crate::emit::emit_all;
use crate::score::{score_batch, ScoreError, ScoreOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Generate,
    Perturb,
    Score,
    Analyze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Input,
    Backend,
    Protocol,
    Range,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} stage: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

impl StageError {
    pub fn new(stage: Stage, kind: ErrorKind, message: impl fmt::Display) -> Self {
        StageError { stage, kind, message: message.to_string() }
    }

    pub fn input(stage: Stage, message: impl fmt::Display) -> Self {
        Self::new(stage, ErrorKind::Input, message)
    }

    /// 2 for usage and input problems, 3 when a scorer misbehaved.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage | ErrorKind::Input => 2,
            ErrorKind::Backend | ErrorKind::Protocol | ErrorKind::Range => 3,
        }
    }

    /// One-line JSON for stderr.
    pub fn summary_json(&self) -> String {
        serde_json::json!({ "error": self, "exit_code": self.exit_code() }).to_string()
    }
}

fn score_error(err: ScoreError) -> StageError {
    let kind = match err {
        ScoreError::Setup { .. } | ScoreError::Cache(_) => ErrorKind::Input,
        ScoreError::Backend { .. } => ErrorKind::Backend,
        ScoreError::Protocol { .. } => ErrorKind::Protocol,
        ScoreError::Range { .. } => ErrorKind::Range,
    };
    StageError::new(Stage::Score, kind, err)
}

pub fn load_lexicon(config: &RunConfig, stage: Stage) -> Result<LexiconSet, StageError> {
    match &config.lexicon_path {
        None => Ok(LexiconSet::default_set()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| StageError::input(stage, format!("cannot read lexicon {}: {e}", path.display())))?;
            LexiconSet::from_json(&text)
                .map_err(|e| StageError::input(stage, format!("lexicon {}: {e}", path.display())))
        }
    }
}

/// Sentence counts of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CorpusBreakdown {
    pub total: usize,
    pub controls: usize,
    pub by_origin: BTreeMap<String, usize>,
    /// Perturbed sentences per group, in lexicon order.
    pub by_group: Vec<(String, usize)>,
}

impl CorpusBreakdown {
    pub fn of(instances: &[SentenceInstance], group_order: &[String]) -> Self {
        let mut b = CorpusBreakdown { total: instances.len(), ..Default::default() };
        b.by_group = group_order.iter().map(|g| (g.clone(), 0)).collect();
        for inst in instances {
            let origin = match inst.origin {
                Origin::Template => "template",
                Origin::Natural => "natural",
            };
            *b.by_origin.entry(origin.into()).or_default() += 1;
            match &inst.group_id {
                None => b.controls += 1,
                Some(g) => match b.by_group.iter_mut().find(|(id, _)| id == g) {
                    Some((_, n)) => *n += 1,
                    None => b.by_group.push((g.clone(), 1)),
                },
            }
        }
        b
    }
}

impl fmt::Display for CorpusBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances: {}", self.total)?;
        for (origin, n) in &self.by_origin {
            writeln!(f, "origin {origin}: {n}")?;
        }
        writeln!(f, "controls: {}", self.controls)?;
        for (group, n) in &self.by_group {
            writeln!(f, "group {group}: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerateSummary {
    pub path: PathBuf,
    pub counts: CorpusBreakdown,
    pub expected: CorpusCounts,
    pub seed: Option<u64>,
}

impl fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus: {}", self.path.display())?;
        write!(f, "{}", self.counts)?;
        writeln!(
            f,
            "closed-form count: {} ({} controls + {} perturbed)",
            self.expected.total(),
            self.expected.controls,
            self.expected.perturbed
        )?;
        if let Some(seed) = self.seed {
            writeln!(f, "sampling seed: {seed}")?;
        }
        Ok(())
    }
}

fn group_order(set: &LexiconSet) -> Vec<String> {
    set.groups.iter().map(|g| g.group_id.clone()).collect()
}

/// Instantiates the template corpus and writes it to the corpus path.
pub fn generate(config: &RunConfig) -> Result<GenerateSummary, StageError> {
    let set = load_lexicon(config, Stage::Generate)?;
    let err = |e: &dyn fmt::Display| StageError::input(Stage::Generate, e);
    let instances = instantiate_templates(&set, &config.sampling).map_err(|e| err(&e))?;
    let expected = expected_counts(&set, &config.sampling).map_err(|e| err(&e))?;
    let path = config.corpus_path();
    write_corpus(&instances, &path).map_err(|e| err(&e))?;
    Ok(GenerateSummary {
        path,
        counts: CorpusBreakdown::of(&instances, &group_order(&set)),
        expected,
        seed: config.sampling.words_per_emotion.and(config.sampling.seed),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerturbSummary {
    pub path: PathBuf,
    pub documents: usize,
    /// Documents without any seed mention.
    pub skipped: Vec<String>,
    pub counts: CorpusBreakdown,
}

impl fmt::Display for PerturbSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus: {}", self.path.display())?;
        writeln!(f, "documents: {}", self.documents)?;
        writeln!(f, "skipped (no seed term): {}", self.skipped.len())?;
        for doc in &self.skipped {
            writeln!(f, "  {doc}")?;
        }
        write!(f, "{}", self.counts)
    }
}

/// Perturbs every document in `input_dir` and writes a natural corpus.
pub fn perturb(
    config: &RunConfig,
    input_dir: &Path,
    layout: DocumentLayout,
    seeds: &[SeedTerm],
    source: &str,
) -> Result<PerturbSummary, StageError> {
    let set = load_lexicon(config, Stage::Perturb)?;
    let docs = read_documents(input_dir, layout, source).map_err(|e| StageError::input(Stage::Perturb, e))?;
    let mut instances = Vec::new();
    let mut skipped = Vec::new();
    for doc in &docs {
        let out = perturb_document(doc, seeds, &set.groups);
        if out.is_empty() {
            skipped.push(doc.doc_id.clone());
        }
        instances.extend(out);
    }
    let path = config.corpus_path();
    write_corpus(&instances, &path).map_err(|e| StageError::input(Stage::Perturb, e))?;
    Ok(PerturbSummary {
        path,
        documents: docs.len(),
        skipped,
        counts: CorpusBreakdown::of(&instances, &group_order(&set)),
    })
}

/// Timestamp for records produced now. `SOURCE_DATE_EPOCH` wins; otherwise
/// the builtin scorer stamps 0 so its output is reproducible and external
/// scorers stamp the wall clock.
pub fn scored_at(model: &ModelDescriptor) -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return epoch;
    }
    if model.transport == Transport::Builtin {
        return 0;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelScoreSummary {
    pub model_id: String,
    pub sentences: usize,
    pub newly_scored: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreSummary {
    pub cache: PathBuf,
    pub models: Vec<ModelScoreSummary>,
}

impl fmt::Display for ScoreSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cache: {}", self.cache.display())?;
        for m in &self.models {
            writeln!(f, "model {}: {} sentences, {} newly scored", m.model_id, m.sentences, m.newly_scored)?;
        }
        Ok(())
    }
}

fn read_stage_corpus(config: &RunConfig, stage: Stage) -> Result<(Vec<SentenceInstance>, String), StageError> {
    let path = config.corpus_path();
    let bytes = std::fs::read(&path).map_err(|e| {
        let what = if e.kind() == std::io::ErrorKind::NotFound { "corpus stage missing" } else { "cannot read corpus" };
        StageError::input(stage, format!("{what}: {}: {e}", path.display()))
    })?;
    let instances = read_corpus(&path).map_err(|e| StageError::input(stage, e))?;
    Ok((instances, content_fingerprint(&bytes)))
}

/// Scores the corpus with every configured model. Models after a failing
/// one are still scored so the cache keeps as much as possible; the first
/// failure is returned.
pub fn score(config: &RunConfig) -> Result<ScoreSummary, StageError> {
    let (instances, _) = read_stage_corpus(config, Stage::Score)?;
    let cache_path = config.cache_path();
    let mut cache = ScoreCache::open(&cache_path).map_err(|e| StageError::input(Stage::Score, e))?;
    let mut summary = ScoreSummary { cache: cache_path, models: Vec::new() };
    let mut first_error = None;
    for model in config.effective_models() {
        let before = cache.len();
        let options = ScoreOptions {
            parallelism: config.parallelism,
            retry: config.retry,
            scored_at: scored_at(&model),
            timeout: std::time::Duration::from_secs(config.timeout_secs),
        };
        match score_batch(&instances, &model, &mut cache, &options) {
            Ok(records) => summary.models.push(ModelScoreSummary {
                model_id: model.model_id.clone(),
                sentences: records.len(),
                newly_scored: cache.len() - before,
            }),
            Err(e) => {
                first_error.get_or_insert(score_error(e));
            }
        }
    }
    let compacted = cache.compact().map_err(|e| StageError::input(Stage::Score, e));
    match first_error {
        Some(e) => Err(e),
        None => compacted.map(|_| summary),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalyzeSummary {
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub corpus_fingerprint: String,
}

impl fmt::Display for AnalyzeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "corpus fingerprint: {}", self.corpus_fingerprint)?;
        writeln!(f, "metric rows: {}", self.rows)?;
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

/// Computes metrics from the corpus and cache and writes the report files.
pub fn analyze(config: &RunConfig) -> Result<AnalyzeSummary, StageError> {
    let set = load_lexicon(config, Stage::Analyze)?;
    let (instances, fingerprint) = read_stage_corpus(config, Stage::Analyze)?;
    let cache_path = config.cache_path();
    if !cache_path.exists() {
        return Err(StageError::input(
            Stage::Analyze,
            format!("score stage missing: no score cache at {}", cache_path.display()),
        ));
    }
    let cache = ScoreCache::open(&cache_path).map_err(|e| StageError::input(Stage::Analyze, e))?;
    let models = config.effective_models();
    let order = group_order(&set);
    let mut analyses = Vec::new();
    let mut echoes = Vec::new();
    let mut generated_at = 0;
    for model in &models {
        let mut scores = BTreeMap::new();
        let mut missing = 0usize;
        for inst in &instances {
            match cache.get(&inst.sentence_id, &model.model_id) {
                Some(r) => {
                    generated_at = generated_at.max(r.scored_at);
                    scores.insert(inst.sentence_id.clone(), r.score);
                }
                None => missing += 1,
            }
        }
        if missing > 0 {
            return Err(StageError::input(
                Stage::Analyze,
                format!(
                    "score stage incomplete: model {} lacks scores for {missing} of {} sentences",
                    model.model_id,
                    instances.len()
                ),
            ));
        }
        let threshold = config.thresholds.for_kind(model.kind);
        let options = AnalysisOptions { threshold, test: config.test };
        let analysis = analyze_model(&instances, &scores, model, &fingerprint, &order, &options)
            .map_err(|e| StageError::input(Stage::Analyze, e))?;
        analyses.push(analysis);
        echoes.push(ModelEcho {
            model_id: model.model_id.clone(),
            kind: model.kind,
            transport: model.transport,
            threshold,
            bias_direction: model.direction(),
        });
    }
    let counts = CorpusBreakdown::of(&instances, &order);
    let mut notes = vec![format!(
        "corpus holds {} sentences ({} controls, {} perturbed)",
        counts.total,
        counts.controls,
        counts.total - counts.controls
    )];
    if counts.by_origin.contains_key("template") && config.sampling == Default::default() {
        notes.push(
            "template corpus is the full cross-product of the lexicon; smaller published subsets can be \
             approximated with sampling.words_per_emotion and sampling.templates"
                .into(),
        );
    }
    let meta = ReportMeta { corpus_fingerprint: fingerprint.clone(), models: echoes, group_order: order, test: config.test, generated_at, notes };
    let report = build_report(analyses, meta).map_err(|e| StageError::input(Stage::Analyze, e))?;
    let files = emit_all(&report, &config.output_dir).map_err(|e| StageError::input(Stage::Analyze, e))?;
    Ok(AnalyzeSummary { files, rows: report.rows.len(), corpus_fingerprint: fingerprint })
}
