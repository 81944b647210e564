//! Writes an audit report as JSON, CSV and markdown.

use std::path::{Path, PathBuf};

use bits_core::AuditReport;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

pub const REPORT_JSON: &str = "report.json";
pub const GROUPS_CSV: &str = "groups.csv";
pub const PER_TERM_CSV: &str = "per_term.csv";
pub const PER_TEMPLATE_CSV: &str = "per_template.csv";
pub const REPORT_MD: &str = "report.md";

fn write(path: &Path, bytes: &[u8]) -> Result<(), EmitError> {
    std::fs::write(path, bytes).map_err(|source| EmitError::Io { path: path.into(), source })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), EmitError> {
    let csv_err = |source| EmitError::Csv { path: path.into(), source };
    let mut out = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        out.serialize(row).map_err(csv_err)?;
    }
    out.flush().map_err(|source| EmitError::Io { path: path.into(), source })
}

/// Writes one format into `dir` and returns the files written. CSV gives
/// one file per table; the per-template table is skipped when empty.
pub fn emit(report: &AuditReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    std::fs::create_dir_all(dir).map_err(|source| EmitError::Io { path: dir.into(), source })?;
    let mut written = Vec::new();
    match format {
        Format::Json => {
            let path = dir.join(REPORT_JSON);
            let mut bytes = serde_json::to_vec_pretty(report).expect("reports always serialize");
            bytes.push(b'\n');
            write(&path, &bytes)?;
            written.push(path);
        }
        Format::Csv => {
            let path = dir.join(GROUPS_CSV);
            write_csv(&path, &report.rows)?;
            written.push(path);
            let path = dir.join(PER_TERM_CSV);
            write_csv(&path, &report.per_term)?;
            written.push(path);
            let path = dir.join(PER_TEMPLATE_CSV);
            if report.per_template.is_empty() {
                if path.exists() {
                    std::fs::remove_file(&path).map_err(|source| EmitError::Io { path: path.clone(), source })?;
                }
            } else {
                write_csv(&path, &report.per_template)?;
                written.push(path);
            }
        }
        Format::Markdown => {
            let path = dir.join(REPORT_MD);
            write(&path, report.to_markdown().as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Every format.
pub fn emit_all(report: &AuditReport, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
    let mut written = Vec::new();
    for format in [Format::Json, Format::Csv, Format::Markdown] {
        written.extend(emit(report, format, dir)?);
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<AuditReport, EmitError> {
    let text = std::fs::read_to_string(path).map_err(|source| EmitError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| EmitError::Json { path: path.into(), source })
}
