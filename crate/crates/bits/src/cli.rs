//! Command-line interface.

use std::path::{Path, PathBuf};

use bits_core::analysis::TestVariant;
use bits_core::lexicon::SlotForm;
use bits_core::{ModelDescriptor, SeedTerm, Transport};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, DEFAULT_BUILTIN_ID};
use crate::corpus_io::DocumentLayout;
use crate::pipeline::{self, ErrorKind, Stage, StageError};

#[derive(Debug, Parser)]
#[command(name = "bits", version, about = "Audit sentiment and toxicity scorers for disability bias")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Welch,
    Paired,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration; `./bits.json` is used when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Lexicon JSON (groups, emotions, templates).
    #[arg(long, global = true)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Output directory for stage files and reports.
    #[arg(long = "out", global = true)]
    pub output_dir: Option<PathBuf>,
    /// Scoring batches in flight at once.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Seed for slot-word sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Keep this many emotional and event words per emotion.
    #[arg(long, global = true)]
    pub words_per_emotion: Option<usize>,
    /// Template ids, e.g. `T1..T5` or `T1,T3,T6..T8`.
    #[arg(long, global = true)]
    pub templates: Option<String>,
    /// Comma-separated group ids.
    #[arg(long, global = true, value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sentiment_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub toxicity_threshold: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub test: Option<TestArg>,
}

#[derive(Debug, Args, Default)]
pub struct ScorerArgs {
    /// Use only builtin scorers; never touches the network or other processes.
    #[arg(long)]
    pub builtin_only: bool,
    /// Valence table for builtin scorers that do not name one.
    #[arg(long)]
    pub valence_table: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Instantiate the template corpus.
    Generate,
    /// Perturb natural text documents from a directory.
    Perturb {
        input_dir: PathBuf,
        /// Treat every line of a file as its own document.
        #[arg(long)]
        per_line: bool,
        /// Seed word and the term form replacing it, e.g. `disabled=adjective`.
        #[arg(long = "seed-term", value_parser = parse_seed_term)]
        seed_terms: Vec<SeedTerm>,
        /// Source label stored with each document.
        #[arg(long, default_value = "local")]
        source: String,
    },
    /// Score the corpus with every configured model.
    Score(ScorerArgs),
    /// Compute metrics and write report files.
    Analyze(ScorerArgs),
    /// Generate, score and analyze in one go.
    Audit(ScorerArgs),
}

fn parse_seed_term(s: &str) -> Result<SeedTerm, String> {
    let (word, form) = s.split_once('=').ok_or("expected WORD=adjective or WORD=noun_phrase")?;
    let form = match form {
        "adjective" => SlotForm::Adjective,
        "noun_phrase" => SlotForm::NounPhrase,
        other => return Err(format!("unknown form {other:?}; use adjective or noun_phrase")),
    };
    if word.trim().is_empty() {
        return Err("seed word is empty".into());
    }
    Ok(SeedTerm::new(word.trim(), form))
}

fn split_id(id: &str) -> Option<(&str, u32)> {
    let digits = id.len() - id.trim_start_matches(|c: char| !c.is_ascii_digit()).len();
    let (prefix, number) = id.split_at(digits);
    number.parse().ok().map(|n| (prefix, n))
}

/// Expands `T1..T5` style ranges and comma lists into template ids.
pub fn parse_template_selection(spec: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            None => out.push(part.to_string()),
            Some((from, to)) => {
                let bad = || format!("bad template range {part:?}; expected e.g. T1..T5");
                let (p1, a) = split_id(from.trim()).ok_or_else(bad)?;
                let (p2, b) = split_id(to.trim()).ok_or_else(bad)?;
                if p1 != p2 || a > b {
                    return Err(bad());
                }
                out.extend((a..=b).map(|n| format!("{p1}{n}")));
            }
        }
    }
    if out.is_empty() {
        return Err("empty template selection".into());
    }
    Ok(out)
}

fn usage(message: impl std::fmt::Display) -> StageError {
    StageError::new(Stage::Config, ErrorKind::Usage, message)
}

/// Loads the config file (explicit or `./bits.json`) and applies flags.
pub fn resolve_config(global: &GlobalArgs, cwd: &Path) -> Result<RunConfig, StageError> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path).map_err(|e| StageError::input(Stage::Config, e))?,
        None => {
            let default = cwd.join("bits.json");
            if default.is_file() {
                RunConfig::load(&default).map_err(|e| StageError::input(Stage::Config, e))?
            } else {
                RunConfig::default()
            }
        }
    };
    if let Some(p) = &global.lexicon {
        config.lexicon_path = Some(p.clone());
    }
    if let Some(p) = &global.corpus {
        config.corpus_path = Some(p.clone());
    }
    if let Some(p) = &global.cache {
        config.cache_path = Some(p.clone());
    }
    if let Some(p) = &global.output_dir {
        config.output_dir = p.clone();
    }
    if let Some(n) = global.parallelism {
        config.parallelism = n;
    }
    if let Some(seed) = global.seed {
        config.sampling.seed = Some(seed);
    }
    if let Some(n) = global.words_per_emotion {
        config.sampling.words_per_emotion = Some(n);
    }
    if let Some(spec) = &global.templates {
        config.sampling.templates = Some(parse_template_selection(spec).map_err(usage)?);
    }
    if let Some(groups) = &global.groups {
        config.sampling.groups = Some(groups.clone());
    }
    if let Some(t) = global.sentiment_threshold {
        config.thresholds.sentiment = t;
    }
    if let Some(t) = global.toxicity_threshold {
        config.thresholds.toxicity = t;
    }
    if let Some(test) = global.test {
        config.test = match test {
            TestArg::Welch => TestVariant::Welch,
            TestArg::Paired => TestVariant::Paired,
        };
    }
    config.validate().map_err(usage)?;
    Ok(config)
}

fn apply_scorer_args(config: &mut RunConfig, args: &ScorerArgs) {
    if args.builtin_only {
        config.restrict_to_builtin();
    }
    if let Some(table) = &args.valence_table {
        if config.models.is_empty() {
            config.models.push(ModelDescriptor::builtin(DEFAULT_BUILTIN_ID));
        }
        for model in config.models.iter_mut().filter(|m| m.transport == Transport::Builtin && m.endpoint.is_empty()) {
            model.endpoint = table.to_string_lossy().into_owned();
        }
    }
}

/// Runs one command and returns the text to print on success.
pub fn execute(cli: &Cli, cwd: &Path) -> Result<String, StageError> {
    let mut config = resolve_config(&cli.global, cwd)?;
    match &cli.command {
        Command::Generate => Ok(pipeline::generate(&config)?.to_string()),
        Command::Perturb { input_dir, per_line, seed_terms, source } => {
            let layout = if *per_line { DocumentLayout::PerLine } else { DocumentLayout::PerFile };
            let seeds = if seed_terms.is_empty() { SeedTerm::defaults() } else { seed_terms.clone() };
            let summary = pipeline::perturb(&config, input_dir, layout, &seeds, source)?;
            if summary.documents == 0 {
                eprintln!("warning: no documents found in {}; wrote an empty corpus", input_dir.display());
            }
            Ok(summary.to_string())
        }
        Command::Score(args) => {
            apply_scorer_args(&mut config, args);
            Ok(pipeline::score(&config)?.to_string())
        }
        Command::Analyze(args) => {
            apply_scorer_args(&mut config, args);
            Ok(pipeline::analyze(&config)?.to_string())
        }
        Command::Audit(args) => {
            apply_scorer_args(&mut config, args);
            let mut out = pipeline::generate(&config)?.to_string();
            out.push_str(&pipeline::score(&config)?.to_string());
            out.push_str(&pipeline::analyze(&config)?.to_string());
            Ok(out)
        }
    }
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cwd = std::env::current_dir().unwrap_or_default();
    match execute(&cli, &cwd) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.summary_json());
            e.exit_code()
        }
    }
}
