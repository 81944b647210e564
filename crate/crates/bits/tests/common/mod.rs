#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Output;
use std::sync::{Arc, Mutex};

use bits::cache::ScoreCache;
use bits::config::RetryPolicy;
use bits::score::{score_batch, ScoreError, ScoreOptions};
use bits_core::{ModelDescriptor, Origin, ScoreRecord, SentenceInstance, Transport};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn transcript(name: &str) -> PathBuf {
    manifest_dir().join("tests/transcripts").join(format!("{name}.jsonl"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

pub fn bits_bin() -> &'static str {
    env!("CARGO_BIN_EXE_bits")
}

pub fn mock_scorer_bin() -> &'static str {
    env!("CARGO_BIN_EXE_bits-mock-scorer")
}

pub fn run_bits(cwd: &Path, args: &[&str]) -> Output {
    std::process::Command::new(bits_bin())
        .args(args)
        .current_dir(cwd)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("bits runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn instance(id: &str, text: &str) -> SentenceInstance {
    SentenceInstance {
        sentence_id: id.into(),
        text: text.into(),
        origin: Origin::Natural,
        template_id: None,
        group_id: None,
        term_id: None,
        slot_word: None,
        emotion: None,
        control_id: id.into(),
        source_doc: None,
    }
}

pub fn three_instances() -> Vec<SentenceInstance> {
    vec![instance("s1", "I am happy"), instance("s2", "not happy"), instance("s3", "a gloomy day")]
}

fn quote(p: &Path) -> String {
    format!("'{}'", p.display())
}

/// A subprocess model replaying `transcripts` in order across invocations.
/// Requests go to `dir/requests.log`, invocations are counted in `dir/state`.
pub fn mock_model(dir: &Path, transcripts: &[&str]) -> ModelDescriptor {
    let mut cmd = format!("{} --state {} --log {}", mock_scorer_bin(), quote(&dir.join("state")), quote(&dir.join("requests.log")));
    for t in transcripts {
        cmd.push_str(&format!(" --transcript {}", quote(&transcript(t))));
    }
    ModelDescriptor { transport: Transport::Subprocess, endpoint: cmd, ..ModelDescriptor::builtin("mock") }
}

pub fn logged_requests(dir: &Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("requests.log"))
        .map(|s| s.lines().map(str::to_string).collect())
        .unwrap_or_default()
}

pub fn invocations(dir: &Path) -> usize {
    std::fs::read_to_string(dir.join("state")).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

pub fn fast_options() -> ScoreOptions {
    ScoreOptions { retry: RetryPolicy { max_attempts: 3, base_delay_ms: 5 }, ..ScoreOptions::default() }
}

pub struct Run {
    pub dir: tempfile::TempDir,
    pub result: Result<Vec<ScoreRecord>, ScoreError>,
    pub cache: ScoreCache,
}

/// Scores `instances` through the transcripts with an optional pre-seeded
/// cache record.
pub fn run_transcripts(transcripts: &[&str], instances: &[SentenceInstance], cached: &[(&str, f64)]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let model = mock_model(dir.path(), transcripts);
    let mut cache = ScoreCache::open(&dir.path().join("scores.jsonl")).unwrap();
    for (id, score) in cached {
        cache
            .insert(ScoreRecord {
                sentence_id: id.to_string(),
                model_id: model.model_id.clone(),
                score: *score,
                raw_range: None,
                label: None,
                scored_at: 0,
            })
            .unwrap();
    }
    let result = score_batch(instances, &model, &mut cache, &fast_options());
    Run { dir, result, cache }
}

fn ids(records: &[ScoreRecord]) -> Vec<&str> {
    records.iter().map(|r| r.sentence_id.as_str()).collect()
}

fn expect(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub type Case = (&'static str, fn() -> Result<(), String>);

/// Golden-transcript conformance cases shared by the protocol tests and the
/// acceptance suite.
pub fn protocol_cases() -> Vec<Case> {
    vec![
        ("in-order responses succeed", || {
            let run = run_transcripts(&["in_order"], &three_instances(), &[]);
            let records = run.result.map_err(|e| e.to_string())?;
            expect(ids(&records) == ["s1", "s2", "s3"] && records.iter().all(|r| r.score == 0.25), || format!("{records:?}"))
        }),
        ("out-of-order responses are merged in corpus order", || {
            let run = run_transcripts(&["out_of_order"], &three_instances(), &[]);
            let records = run.result.map_err(|e| e.to_string())?;
            let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
            expect(ids(&records) == ["s1", "s2", "s3"] && scores == [0.5, 0.0, -0.5], || format!("{records:?}"))
        }),
        ("blank lines between responses are ignored", || {
            let run = run_transcripts(&["empty_lines_tolerated"], &three_instances(), &[]);
            let records = run.result.map_err(|e| e.to_string())?;
            let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
            expect(scores == [0.8, -0.8, -0.5], || format!("{scores:?}"))
        }),
        ("malformed line gives ProtocolError and keeps earlier scores", || {
            let run = run_transcripts(&["malformed_line"], &three_instances(), &[]);
            match run.result {
                Err(ScoreError::Protocol { message, .. }) => {
                    expect(run.cache.get("s1", "mock").is_some(), || "s1 not cached".into())?;
                    expect(invocations(run.dir.path()) == 1, || "protocol errors must not be retried".into())?;
                    expect(message.contains("malformed"), || message)
                }
                other => Err(format!("expected ProtocolError, got {other:?}")),
            }
        }),
        ("unknown id gives ProtocolError", || {
            let run = run_transcripts(&["unknown_id"], &three_instances(), &[]);
            match run.result {
                Err(ScoreError::Protocol { message, .. }) => expect(message.contains("s9"), || message),
                other => Err(format!("expected ProtocolError, got {other:?}")),
            }
        }),
        ("non-numeric score gives ProtocolError", || {
            let run = run_transcripts(&["non_numeric_score"], &three_instances()[..1], &[]);
            expect(matches!(run.result, Err(ScoreError::Protocol { .. })), || format!("{:?}", run.result))
        }),
        ("repeated mid-stream EOF gives BackendError after bounded retries", || {
            let run = run_transcripts(&["eof_before_answers"], &three_instances(), &[]);
            let requests = logged_requests(run.dir.path());
            match run.result {
                Err(ScoreError::Backend { message, .. }) => {
                    expect(invocations(run.dir.path()) == 3, || format!("{} invocations", invocations(run.dir.path())))?;
                    expect(requests.len() == 9, || format!("{requests:?}"))?;
                    expect(message.contains("unanswered"), || message)
                }
                other => Err(format!("expected BackendError, got {other:?}")),
            }
        }),
        ("mid-stream EOF resends only pending ids and recovers", || {
            let run = run_transcripts(&["midstream_eof", "answer_rest"], &three_instances(), &[]);
            let records = run.result.map_err(|e| e.to_string())?;
            let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
            expect(scores == [0.1, 0.7, 0.7], || format!("{scores:?}"))?;
            let requests = logged_requests(run.dir.path());
            expect(requests.len() == 5, || format!("{requests:?}"))
        }),
        ("missing handshake gives BackendError after retries", || {
            let run = run_transcripts(&["no_handshake"], &three_instances(), &[]);
            expect(matches!(run.result, Err(ScoreError::Backend { .. })), || format!("{:?}", run.result))?;
            expect(invocations(run.dir.path()) == 3, || "expected 3 attempts".into())
        }),
        ("wrong protocol version gives BackendError without retry", || {
            let run = run_transcripts(&["wrong_protocol"], &three_instances(), &[]);
            expect(matches!(run.result, Err(ScoreError::Backend { .. })), || format!("{:?}", run.result))?;
            expect(invocations(run.dir.path()) == 1, || "handshake mismatch must not be retried".into())
        }),
        ("per-item error line gives BackendError naming the id", || {
            let run = run_transcripts(&["item_error"], &three_instances(), &[]);
            match run.result {
                Err(ScoreError::Backend { message, .. }) => expect(message.contains("s2"), || message),
                other => Err(format!("expected BackendError, got {other:?}")),
            }
        }),
        ("out-of-range score gives RangeError naming the sentence", || {
            let run = run_transcripts(&["out_of_range"], &three_instances(), &[]);
            match run.result {
                Err(ScoreError::Range { sentence_id, value, .. }) => {
                    expect(sentence_id == "s2" && value == 3.7, || format!("{sentence_id} {value}"))
                }
                other => Err(format!("expected RangeError, got {other:?}")),
            }
        }),
        ("cached sentences are not re-sent", || {
            let run = run_transcripts(&["answer_rest"], &three_instances(), &[("s2", -0.1)]);
            let records = run.result.map_err(|e| e.to_string())?;
            let requests = logged_requests(run.dir.path());
            expect(records.len() == 3 && requests.len() == 2, || format!("{} records, {requests:?}", records.len()))?;
            expect(!requests.iter().any(|r| r.contains("\"s2\"")), || format!("{requests:?}"))
        }),
        ("a fully cached corpus starts no scorer", || {
            let cached = [("s1", 0.0), ("s2", 0.0), ("s3", 0.0)];
            let run = run_transcripts(&["no_handshake"], &three_instances(), &cached);
            run.result.map_err(|e| e.to_string())?;
            expect(invocations(run.dir.path()) == 0, || "scorer was started".into())
        }),
    ]
}

/// Reply of the mock HTTP scorer: status and body.
pub type Handler = dyn Fn(&str) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server for one-request-per-connection clients.
pub struct MockHttp {
    pub url: String,
    pub requests: Arc<Mutex<Vec<(String, Option<String>, String)>>>,
}

impl MockHttp {
    pub fn start(handler: Box<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                let mut length = 0usize;
                let mut auth = None;
                loop {
                    let mut header = String::new();
                    if reader.read_line(&mut header).unwrap_or(0) == 0 || header.trim().is_empty() {
                        break;
                    }
                    let (name, value) = header.split_once(':').unwrap_or((&header, ""));
                    match name.trim().to_ascii_lowercase().as_str() {
                        "content-length" => length = value.trim().parse().unwrap_or(0),
                        "authorization" => auth = Some(value.trim().to_string()),
                        _ => {}
                    }
                }
                let mut body = vec![0; length];
                let _ = reader.read_exact(&mut body);
                let body = String::from_utf8_lossy(&body).into_owned();
                let (status, reply) = handler(&body);
                log.lock().unwrap().push((request_line.trim().to_string(), auth, body));
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        MockHttp { url, requests }
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

/// Scores every posted text with the builtin lexicon, answering in reverse.
pub fn valence_handler() -> Box<Handler> {
    Box::new(|body: &str| {
        let value: serde_json::Value = serde_json::from_str(body).unwrap();
        let table = bits_core::valence::ValenceTable::default();
        let mut scores: Vec<serde_json::Value> = value["texts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| serde_json::json!({"id": t["id"], "score": table.score(t["text"].as_str().unwrap())}))
            .collect();
        scores.reverse();
        (200, serde_json::json!({ "scores": scores }).to_string())
    })
}

/// Port with nothing listening.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}
