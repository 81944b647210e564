//! Scoring a corpus through one backend with caching, retries and bounded
//! parallelism.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use bits_core::{ModelDescriptor, ScoreRecord, SentenceInstance, Transport};

use crate::backend::{Attempt, Backend, BuiltinBackend, Failure, HttpBackend, Request, SubprocessBackend};
use crate::cache::{CacheError, ScoreCache};
use crate::config::RetryPolicy;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("model {model_id}: cannot set up backend: {message}")]
    Setup { model_id: String, message: String },
    #[error("model {model_id}: backend error: {message}")]
    Backend { model_id: String, message: String },
    #[error("model {model_id}: score {value} for sentence {sentence_id} is outside the declared range [{lo}, {hi}]")]
    Range { model_id: String, sentence_id: String, value: f64, lo: f64, hi: f64 },
    #[error("model {model_id}: protocol error: {message}")]
    Protocol { model_id: String, message: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    /// Batches in flight at once.
    pub parallelism: usize,
    pub retry: RetryPolicy,
    /// Stamped on new records.
    pub scored_at: u64,
    pub timeout: Duration,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { parallelism: 1, retry: RetryPolicy::default(), scored_at: 0, timeout: Duration::from_secs(30) }
    }
}

/// Requests per batch when the descriptor does not say.
pub fn default_batch_size(transport: Transport) -> usize {
    match transport {
        Transport::Builtin => 4096,
        Transport::Subprocess => 256,
        Transport::Http => 32,
    }
}

/// Builds the backend a descriptor points at.
pub fn backend_for(model: &ModelDescriptor, options: &ScoreOptions) -> Result<Box<dyn Backend>, ScoreError> {
    let setup = |message: String| ScoreError::Setup { model_id: model.model_id.clone(), message };
    model.validate().map_err(|e| setup(e.to_string()))?;
    Ok(match model.transport {
        Transport::Builtin if model.endpoint.is_empty() => Box::new(BuiltinBackend::default()),
        Transport::Builtin => Box::new(BuiltinBackend::from_table_file(Path::new(&model.endpoint)).map_err(setup)?),
        Transport::Subprocess => Box::new(SubprocessBackend::new(model.endpoint.clone())),
        Transport::Http => {
            let bearer = match &model.bearer_token_env {
                Some(var) => Some(std::env::var(var).map_err(|_| setup(format!("environment variable {var} is not set")))?),
                None => None,
            };
            Box::new(HttpBackend::new(&model.endpoint, options.timeout, bearer))
        }
    })
}

/// Scores every instance, reusing cached records. New records are written to
/// the cache as they arrive, so a failing run keeps its partial progress.
/// The result holds one record per distinct sentence id, in corpus order.
pub fn score_batch(
    instances: &[SentenceInstance],
    model: &ModelDescriptor,
    cache: &mut ScoreCache,
    options: &ScoreOptions,
) -> Result<Vec<ScoreRecord>, ScoreError> {
    let backend = backend_for(model, options)?;
    score_batch_with(backend.as_ref(), instances, model, cache, options)
}

/// Runs one batch to completion, retrying transient failures for the ids
/// still unanswered.
fn run_batch(backend: &dyn Backend, batch: &[Request], retry: &RetryPolicy, stop: &AtomicBool) -> Attempt {
    let mut pending: Vec<Request> = batch.to_vec();
    let mut answered = Vec::new();
    let mut attempt = 1;
    loop {
        let result = backend.score(&pending);
        let got: BTreeSet<&str> = result.answered.iter().map(|(id, _)| id.as_str()).collect();
        pending.retain(|r| !got.contains(r.id.as_str()));
        answered.extend(result.answered);
        let failure = match result.failure {
            None if pending.is_empty() => return Attempt { answered, failure: None },
            None => Failure::Protocol(format!("backend left {} requests unanswered", pending.len())),
            Some(f) => f,
        };
        match failure {
            Failure::Transient(msg) if attempt >= retry.max_attempts || stop.load(Ordering::SeqCst) => {
                let msg = format!("{msg} (gave up after {attempt} attempts)");
                return Attempt { answered, failure: Some(Failure::Backend(msg)) };
            }
            Failure::Transient(_) => {
                std::thread::sleep(retry.delay(attempt));
                attempt += 1;
            }
            other => return Attempt { answered, failure: Some(other) },
        }
    }
}

/// Keeps the error of the earliest batch so the reported failure does not
/// depend on thread timing.
fn keep_error(idx: usize, err: ScoreError, slot: &mut Option<(usize, ScoreError)>) {
    if slot.as_ref().is_none_or(|(i, _)| idx < *i) {
        *slot = Some((idx, err));
    }
}

/// [`score_batch`] against an explicit backend.
pub fn score_batch_with(
    backend: &dyn Backend,
    instances: &[SentenceInstance],
    model: &ModelDescriptor,
    cache: &mut ScoreCache,
    options: &ScoreOptions,
) -> Result<Vec<ScoreRecord>, ScoreError> {
    let mut seen = BTreeSet::new();
    let todo: Vec<Request> = instances
        .iter()
        .filter(|i| seen.insert(i.sentence_id.as_str()))
        .filter(|i| cache.get(&i.sentence_id, &model.model_id).is_none())
        .map(|i| Request { id: i.sentence_id.clone(), text: i.text.clone() })
        .collect();
    let batch_size = model.batch_size.unwrap_or_else(|| default_batch_size(model.transport)).max(1);
    let batches: Vec<&[Request]> = todo.chunks(batch_size).collect();

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = options.parallelism.max(1).min(batches.len());
    // (batch index, error) of the earliest failing batch
    let mut first_error: Option<(usize, ScoreError)> = None;

    std::thread::scope(|scope| -> Result<(), ScoreError> {
        let (tx, rx) = mpsc::channel::<(usize, Attempt)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop, batches) = (&next, &stop, &batches);
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let idx = next.fetch_add(1, Ordering::SeqCst);
                let Some(batch) = batches.get(idx) else { break };
                let attempt = run_batch(backend, batch, &options.retry, stop);
                if tx.send((idx, attempt)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (idx, attempt) in rx {
            let order: Vec<&str> = batches[idx].iter().map(|r| r.id.as_str()).collect();
            let mut answered = attempt.answered;
            answered.sort_by_key(|(id, _)| order.iter().position(|o| o == id));
            for (sentence_id, raw) in answered {
                match model.normalize(raw) {
                    Ok((score, raw_range)) => cache.insert(ScoreRecord {
                        sentence_id,
                        model_id: model.model_id.clone(),
                        score,
                        raw_range,
                        label: None,
                        scored_at: options.scored_at,
                    })?,
                    Err(out) => {
                        stop.store(true, Ordering::SeqCst);
                        let err = ScoreError::Range {
                            model_id: model.model_id.clone(),
                            sentence_id,
                            value: out.value,
                            lo: out.range.lo,
                            hi: out.range.hi,
                        };
                        keep_error(idx, err, &mut first_error);
                        break;
                    }
                }
            }
            if let Some(failure) = attempt.failure {
                stop.store(true, Ordering::SeqCst);
                let model_id = model.model_id.clone();
                let err = match failure {
                    Failure::Protocol(message) => ScoreError::Protocol { model_id, message },
                    Failure::Backend(message) | Failure::Transient(message) => ScoreError::Backend { model_id, message },
                };
                keep_error(idx, err, &mut first_error);
            }
        }
        Ok(())
    })?;

    if let Some((_, err)) = first_error {
        return Err(err);
    }
    let mut seen = BTreeSet::new();
    Ok(instances
        .iter()
        .filter(|i| seen.insert(i.sentence_id.as_str()))
        .map(|i| cache.get(&i.sentence_id, &model.model_id).cloned().expect("every instance was scored"))
        .collect())
}
