//! Scripted scorer for protocol tests.
//!
//! Without `--transcript` it is a live scorer that answers every request
//! with the builtin lexicon score. With transcripts it replays one of them,
//! one JSON directive per line (`//` lines are comments):
//!
//! * `{"send": value}` prints `value` as JSON, or verbatim if it is a string
//! * `{"recv": n}` reads `n` request lines; `{"recv_all": true}` reads to EOF
//! * `{"respond": "forward" | "reverse", "score": x}` answers every request
//!   read so far and not yet answered; `score` may be `"valence"`
//! * `{"sleep_ms": n}` and `{"exit": code}`
//!
//! Repeated `--transcript` flags plus `--state FILE` pick the transcript by
//! invocation count, so retries can see different behaviour.

use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use bits::backend::{Request, PROTOCOL};
use bits_core::valence::ValenceTable;
use clap::Parser;
use serde_json::{json, Value};

#[derive(Debug, Parser)]
struct Args {
    #[arg(long)]
    transcript: Vec<PathBuf>,
    /// Invocation counter used to choose among transcripts.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Appends every request line received.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Valence table for live mode and `"score": "valence"`.
    #[arg(long)]
    valence_table: Option<PathBuf>,
}

struct Session {
    log: Option<std::fs::File>,
    table: ValenceTable,
    unanswered: Vec<Request>,
    out: std::io::Stdout,
    input: std::io::StdinLock<'static>,
}

impl Session {
    fn send(&mut self, line: &str) {
        let mut out = self.out.lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
    }

    /// Reads one request; `None` at EOF.
    fn recv(&mut self) -> Option<()> {
        let mut line = String::new();
        if self.input.read_line(&mut line).ok()? == 0 {
            return None;
        }
        if let Some(log) = &mut self.log {
            let _ = log.write_all(line.as_bytes());
        }
        if let Ok(req) = serde_json::from_str::<Request>(line.trim()) {
            self.unanswered.push(req);
        }
        Some(())
    }

    fn score_for(&self, req: &Request, spec: &Value) -> Value {
        match spec {
            Value::String(s) if s == "valence" => json!(self.table.score(&req.text)),
            other => other.clone(),
        }
    }
}

fn pick_transcript(args: &Args) -> Option<PathBuf> {
    if args.transcript.is_empty() {
        return None;
    }
    let mut index = 0usize;
    if let Some(state) = &args.state {
        index = std::fs::read_to_string(state).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0);
        let _ = std::fs::write(state, (index + 1).to_string());
    }
    Some(args.transcript[index.min(args.transcript.len() - 1)].clone())
}

fn main() {
    let args = Args::parse();
    let table = match &args.valence_table {
        Some(path) => {
            let text = std::fs::read_to_string(path).expect("readable valence table");
            let entries: std::collections::BTreeMap<String, f64> = serde_json::from_str(&text).expect("valence table JSON");
            entries.into_iter().collect()
        }
        None => ValenceTable::default(),
    };
    let log = args.log.as_ref().map(|p| OpenOptions::new().create(true).append(true).open(p).expect("writable log"));
    let mut session = Session {
        log,
        table,
        unanswered: Vec::new(),
        out: std::io::stdout(),
        input: std::io::stdin().lock(),
    };

    let Some(transcript) = pick_transcript(&args) else {
        session.send(&json!({ "protocol": PROTOCOL }).to_string());
        while session.recv().is_some() {
            let req = session.unanswered.pop().expect("just read");
            let line = json!({ "id": req.id, "score": session.table.score(&req.text) });
            session.send(&line.to_string());
        }
        return;
    };

    let text = std::fs::read_to_string(&transcript).expect("readable transcript");
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with("//")) {
        let directive: Value = serde_json::from_str(line).expect("transcript directive is JSON");
        if let Some(value) = directive.get("send") {
            match value {
                Value::String(raw) => session.send(raw),
                other => session.send(&other.to_string()),
            }
        } else if let Some(n) = directive.get("recv").and_then(Value::as_u64) {
            for _ in 0..n {
                if session.recv().is_none() {
                    break;
                }
            }
        } else if directive.get("recv_all").is_some() {
            while session.recv().is_some() {}
        } else if let Some(order) = directive.get("respond").and_then(Value::as_str) {
            let spec = directive.get("score").cloned().unwrap_or(json!(0.0));
            let mut pending = std::mem::take(&mut session.unanswered);
            if order == "reverse" {
                pending.reverse();
            }
            for req in &pending {
                let line = json!({ "id": req.id, "score": session.score_for(req, &spec) });
                session.send(&line.to_string());
            }
        } else if let Some(ms) = directive.get("sleep_ms").and_then(Value::as_u64) {
            std::thread::sleep(std::time::Duration::from_millis(ms));
        } else if let Some(code) = directive.get("exit").and_then(Value::as_i64) {
            std::process::exit(code as i32);
        } else {
            eprintln!("unknown directive: {line}");
            std::process::exit(64);
        }
    }
}
