//! Score cache: JSON Lines of score records keyed by (sentence_id, model_id).
//!
//! New records are appended and flushed as they arrive so an interrupted run
//! keeps everything scored so far. `compact` rewrites the file in key order.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bits_core::ScoreRecord;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("score cache {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("score cache {path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },
}

#[derive(Debug)]
pub struct ScoreCache {
    path: PathBuf,
    records: BTreeMap<(String, String), ScoreRecord>,
    appender: Option<File>,
}

impl ScoreCache {
    /// Opens `path`, loading existing records. A missing file is an empty
    /// cache; later duplicates of a key replace earlier ones.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io { path: path.into(), source };
        let mut records = BTreeMap::new();
        match File::open(path) {
            Ok(file) => {
                for (idx, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(io)?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let record: ScoreRecord = serde_json::from_str(&line).map_err(|e| CacheError::Schema {
                        path: path.into(),
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
                    records.insert((record.sentence_id.clone(), record.model_id.clone()), record);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io(e)),
        }
        Ok(ScoreCache { path: path.into(), records, appender: None })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, sentence_id: &str, model_id: &str) -> Option<&ScoreRecord> {
        self.records.get(&(sentence_id.to_string(), model_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ScoreRecord> {
        self.records.values()
    }

    /// Stores a record and appends it to the file immediately.
    pub fn insert(&mut self, record: ScoreRecord) -> Result<(), CacheError> {
        let io = |source| CacheError::Io { path: self.path.clone(), source };
        if self.appender.is_none() {
            if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            let file = OpenOptions::new().create(true).append(true).open(&self.path).map_err(io)?;
            self.appender = Some(file);
        }
        let mut line = serde_json::to_vec(&record).expect("records always serialize");
        line.push(b'\n');
        let file = self.appender.as_mut().expect("opened above");
        file.write_all(&line).and_then(|_| file.flush()).map_err(io)?;
        self.records.insert((record.sentence_id.clone(), record.model_id.clone()), record);
        Ok(())
    }

    /// Rewrites the file with one line per key in sorted order, replacing it
    /// atomically.
    pub fn compact(&mut self) -> Result<(), CacheError> {
        let io = |source| CacheError::Io { path: self.path.clone(), source };
        self.appender = None;
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let tmp = self.path.with_extension("jsonl.tmp");
        {
            let mut out = BufWriter::new(File::create(&tmp).map_err(io)?);
            for record in self.records.values() {
                serde_json::to_writer(&mut out, record).expect("records always serialize");
                out.write_all(b"\n").map_err(io)?;
            }
            out.flush().map_err(io)?;
        }
        std::fs::rename(&tmp, &self.path).map_err(io)
    }
}
