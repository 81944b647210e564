//! JSON Lines corpus files and natural-text ingestion.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bits_core::corpus::{validate_instances, CorpusError};
use bits_core::{NaturalDocument, SentenceInstance};

#[derive(Debug, thiserror::Error)]
pub enum CorpusIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Invariant { path: PathBuf, source: CorpusError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusIoError + '_ {
    move |source| CorpusIoError::Io { path: path.into(), source }
}

/// Writes one instance per line and returns the count written.
pub fn write_corpus(instances: &[SentenceInstance], path: &Path) -> Result<usize, CorpusIoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for inst in instances {
        serde_json::to_writer(&mut out, inst).expect("instances always serialize");
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))?;
    Ok(instances.len())
}

/// Reads a corpus file, rejecting malformed lines by number and checking
/// the control linkage of the whole file. Blank lines are ignored.
pub fn read_corpus(path: &Path) -> Result<Vec<SentenceInstance>, CorpusIoError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: SentenceInstance = serde_json::from_str(&line).map_err(|e| CorpusIoError::Schema {
            path: path.into(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(inst);
    }
    validate_instances(&out).map_err(|source| CorpusIoError::Invariant { path: path.into(), source })?;
    Ok(out)
}

/// How documents are laid out in an input directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DocumentLayout {
    #[default]
    PerFile,
    PerLine,
}

/// Loads every regular file in `dir` (sorted by name) as UTF-8 text.
/// Blank documents are skipped.
pub fn read_documents(dir: &Path, layout: DocumentLayout, source: &str) -> Result<Vec<NaturalDocument>, CorpusIoError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err(dir))?;
    files.retain(|p| p.is_file());
    files.sort();
    let mut docs = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(&file).map_err(io_err(&file))?;
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match layout {
            DocumentLayout::PerFile => docs.extend(NaturalDocument::new(name, text.trim(), source).ok()),
            DocumentLayout::PerLine => {
                for (i, line) in text.lines().enumerate() {
                    docs.extend(NaturalDocument::new(format!("{name}:{}", i + 1), line.trim(), source).ok());
                }
            }
        }
    }
    Ok(docs)
}
