//! Scorer transports.
//!
//! A backend receives one batch of `(id, text)` requests per call and
//! reports what it managed to score together with at most one failure, so a
//! scorer that dies halfway keeps the answers it already gave.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use bits_core::valence::ValenceTable;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Handshake line a subprocess scorer must print first.
pub const PROTOCOL: &str = "bits-score/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Worth retrying: connection refused, non-200, scorer exited early.
    Transient(String),
    /// Not worth retrying: bad handshake, per-item scorer error.
    Backend(String),
    /// The scorer spoke, but not the protocol.
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Attempt {
    pub answered: Vec<(String, f64)>,
    pub failure: Option<Failure>,
}

impl Attempt {
    fn failed(answered: Vec<(String, f64)>, failure: Failure) -> Self {
        Attempt { answered, failure: Some(failure) }
    }
}

pub trait Backend: Send + Sync {
    fn score(&self, batch: &[Request]) -> Attempt;
}

/// Tracks which ids of a batch are still owed an answer.
struct Ledger<'a> {
    pending: BTreeSet<&'a str>,
    answered: Vec<(String, f64)>,
}

impl<'a> Ledger<'a> {
    fn new(batch: &'a [Request]) -> Self {
        Ledger { pending: batch.iter().map(|r| r.id.as_str()).collect(), answered: Vec::new() }
    }

    /// Applies one response object. `Err` ends the attempt.
    fn accept(&mut self, value: &Value) -> Result<(), Failure> {
        let obj = value
            .as_object()
            .ok_or_else(|| Failure::Protocol(format!("expected a JSON object, got {value}")))?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| Failure::Protocol(format!("response without a string id: {value}")))?;
        if !self.pending.contains(id) {
            let what = if self.answered.iter().any(|(a, _)| a == id) { "duplicate" } else { "unknown" };
            return Err(Failure::Protocol(format!("response for {what} id {id:?}")));
        }
        if let Some(err) = obj.get("error") {
            let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
            return Err(Failure::Backend(format!("scorer failed on {id}: {msg}")));
        }
        let score = obj
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| Failure::Protocol(format!("response for {id} lacks a numeric score: {value}")))?;
        self.pending.remove(id);
        self.answered.push((id.to_string(), score));
        Ok(())
    }

    fn done(&self) -> bool {
        self.pending.is_empty()
    }
}

/// The shipped lexicon scorer, optionally with a custom valence table.
#[derive(Debug, Clone, Default)]
pub struct BuiltinBackend {
    table: ValenceTable,
}

impl BuiltinBackend {
    pub fn new(table: ValenceTable) -> Self {
        BuiltinBackend { table }
    }

    /// Loads a `{"word": valence}` JSON table.
    pub fn from_table_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("valence table {}: {e}", path.display()))?;
        let entries: std::collections::BTreeMap<String, f64> =
            serde_json::from_str(&text).map_err(|e| format!("valence table {}: {e}", path.display()))?;
        let table: ValenceTable = entries.into_iter().collect();
        if let Some((word, v)) = table.invalid_entry() {
            return Err(format!("valence table {}: {word:?} has valence {v} outside [-1, 1]", path.display()));
        }
        Ok(BuiltinBackend { table })
    }
}

impl Backend for BuiltinBackend {
    fn score(&self, batch: &[Request]) -> Attempt {
        Attempt { answered: batch.iter().map(|r| (r.id.clone(), self.table.score(&r.text))).collect(), failure: None }
    }
}

/// Spawns `sh -c <command>` once per batch and speaks the line protocol over
/// its standard streams.
#[derive(Debug, Clone)]
pub struct SubprocessBackend {
    command: String,
}

impl SubprocessBackend {
    pub fn new(command: impl Into<String>) -> Self {
        SubprocessBackend { command: command.into() }
    }
}

fn check_handshake(line: &str) -> Result<(), Failure> {
    let value: Value = serde_json::from_str(line.trim())
        .map_err(|_| Failure::Backend(format!("handshake is not JSON: {:?}", line.trim())))?;
    match value.get("protocol").and_then(Value::as_str) {
        Some(PROTOCOL) => Ok(()),
        Some(other) => Err(Failure::Backend(format!("scorer speaks {other:?}, expected {PROTOCOL:?}"))),
        None => Err(Failure::Backend(format!("handshake lacks a protocol field: {}", line.trim()))),
    }
}

impl Backend for SubprocessBackend {
    fn score(&self, batch: &[Request]) -> Attempt {
        let spawned = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn();
        let mut child = match spawned {
            Ok(c) => c,
            Err(e) => return Attempt::failed(Vec::new(), Failure::Transient(format!("cannot start scorer: {e}"))),
        };
        let mut stdout = BufReader::new(child.stdout.take().expect("piped"));
        let mut stderr = child.stderr.take().expect("piped");
        let stdin = child.stdin.take().expect("piped");
        let stderr_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });
        let with_stderr = |msg: String, stderr: String| {
            let tail = stderr.trim();
            if tail.is_empty() {
                msg
            } else {
                format!("{msg} (stderr: {})", tail.lines().last().unwrap_or(tail))
            }
        };

        let mut ledger = Ledger::new(batch);
        let mut line = String::new();
        let outcome: Result<(), Failure> = (|| {
            match stdout.read_line(&mut line) {
                Ok(0) => return Err(Failure::Transient("scorer exited before the handshake".into())),
                Ok(_) => check_handshake(&line)?,
                Err(e) => return Err(Failure::Transient(format!("reading handshake: {e}"))),
            }
            // A separate writer keeps a scorer that answers while reading
            // from deadlocking on full pipes. Closing stdin ends the session.
            let requests: Vec<u8> = batch
                .iter()
                .flat_map(|r| {
                    let mut l = serde_json::to_vec(r).expect("requests serialize");
                    l.push(b'\n');
                    l
                })
                .collect();
            std::thread::spawn(move || {
                let mut stdin = stdin;
                let _ = stdin.write_all(&requests);
            });
            let mut line_no = 1;
            while !ledger.done() {
                line.clear();
                line_no += 1;
                match stdout.read_line(&mut line) {
                    Ok(0) => {
                        return Err(Failure::Transient(format!(
                            "scorer closed its output with {} of {} requests unanswered",
                            ledger.pending.len(),
                            batch.len()
                        )))
                    }
                    Ok(_) => {}
                    Err(e) => return Err(Failure::Transient(format!("reading scorer output: {e}"))),
                }
                if line.trim().is_empty() {
                    continue;
                }
                let value: Value = serde_json::from_str(line.trim())
                    .map_err(|_| Failure::Protocol(format!("malformed line {line_no}: {:?}", line.trim())))?;
                ledger.accept(&value)?;
            }
            Ok(())
        })();
        let _ = child.kill();
        let _ = child.wait();
        let stderr_text = stderr_reader.join().unwrap_or_default();
        let failure = outcome.err().map(|f| match f {
            Failure::Transient(m) => Failure::Transient(with_stderr(m, stderr_text)),
            Failure::Backend(m) => Failure::Backend(with_stderr(m, stderr_text)),
            other => other,
        });
        Attempt { answered: ledger.answered, failure }
    }
}

#[derive(Serialize)]
struct HttpRequestBody<'a> {
    texts: &'a [Request],
}

/// POSTs each batch to `<base>/score`.
pub struct HttpBackend {
    url: String,
    agent: ureq::Agent,
    bearer: Option<String>,
}

impl HttpBackend {
    pub fn new(base: &str, timeout: Duration, bearer: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { url: format!("{}/score", base.trim_end_matches('/')), agent, bearer }
    }
}

impl Backend for HttpBackend {
    fn score(&self, batch: &[Request]) -> Attempt {
        let body = serde_json::to_string(&HttpRequestBody { texts: batch }).expect("requests serialize");
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(token) = &self.bearer {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = match request.send(body.as_str()) {
            Ok(r) => r,
            Err(e) => return Attempt::failed(Vec::new(), Failure::Transient(format!("POST {}: {e}", self.url))),
        };
        let status = response.status().as_u16();
        if status != 200 {
            return Attempt::failed(Vec::new(), Failure::Transient(format!("POST {} returned HTTP {status}", self.url)));
        }
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::failed(Vec::new(), Failure::Transient(format!("reading response: {e}"))),
        };
        let mut ledger = Ledger::new(batch);
        let parsed: Result<Vec<Value>, Failure> = serde_json::from_str::<Value>(&text)
            .ok()
            .and_then(|v| v.get("scores").and_then(Value::as_array).cloned())
            .ok_or_else(|| Failure::Protocol(format!("response is not {{\"scores\": [...]}}: {:.200}", text)));
        let failure = parsed
            .and_then(|items| items.iter().try_for_each(|item| ledger.accept(item)))
            .err()
            .or_else(|| {
                (!ledger.done()).then(|| {
                    Failure::Protocol(format!("response omitted {} of {} ids", ledger.pending.len(), batch.len()))
                })
            });
        Attempt { answered: ledger.answered, failure }
    }
}
