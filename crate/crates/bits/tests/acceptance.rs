//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use bits_core::analysis::{analyze_model, AnalysisOptions, TestVariant};
use bits_core::metrics::jaccard_distance;
use bits_core::{label_dist, welch_t_test, ModelDescriptor, Origin, SentenceInstance, Significance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Outcome = Result<(), String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Relative error with a floor of 1 on the scale, so values near zero are
/// compared absolutely.
fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(1.0)
}

// ---------------------------------------------------------------- metric oracle

struct Corpus {
    instances: Vec<SentenceInstance>,
    scores: BTreeMap<String, f64>,
    /// group → term → per-context perturbed scores
    groups: Vec<(String, Vec<Vec<f64>>)>,
    controls: Vec<f64>,
}

fn draw_score(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.3) {
        rng.gen_range(-8i32..=8) as f64 / 8.0
    } else {
        rng.gen_range(-1.0..=1.0)
    }
}

fn sentence(id: String, control: &str, group: Option<&str>, term: Option<String>) -> SentenceInstance {
    SentenceInstance {
        text: format!("sentence {id}"),
        sentence_id: id,
        origin: Origin::Template,
        template_id: Some("T1".into()),
        group_id: group.map(str::to_string),
        term_id: term,
        slot_word: None,
        emotion: None,
        control_id: control.to_string(),
        source_doc: None,
    }
}

fn random_corpus(rng: &mut ChaCha8Rng) -> Corpus {
    let n_groups = rng.gen_range(1..=3usize);
    let mut terms_per_group = vec![1usize; n_groups];
    let extra = rng.gen_range(0..=6 - n_groups);
    for _ in 0..extra {
        let g = rng.gen_range(0..n_groups);
        terms_per_group[g] += 1;
    }
    let total_terms: usize = terms_per_group.iter().sum();
    let contexts = rng.gen_range(1..=50 / (1 + total_terms));

    let mut instances = Vec::new();
    let mut scores = BTreeMap::new();
    let mut controls = Vec::new();
    let mut groups: Vec<(String, Vec<Vec<f64>>)> =
        terms_per_group.iter().enumerate().map(|(g, &n)| (format!("G{g}"), vec![Vec::new(); n])).collect();
    for c in 0..contexts {
        let control_id = format!("c{c}");
        let s = draw_score(rng);
        controls.push(s);
        scores.insert(control_id.clone(), s);
        instances.push(sentence(control_id.clone(), &control_id, None, None));
        for (group_id, terms) in groups.iter_mut() {
            for (t, column) in terms.iter_mut().enumerate() {
                let id = format!("{group_id}-t{t}-c{c}");
                let s = draw_score(rng);
                column.push(s);
                scores.insert(id.clone(), s);
                instances.push(sentence(id, &control_id, Some(group_id), Some(format!("t{t}"))));
            }
        }
    }
    Corpus { instances, scores, groups, controls }
}

struct Expected {
    sense: f64,
    dev: Option<f64>,
    dist: f64,
    flip: f64,
    mean: f64,
    t: Option<f64>,
    df: Option<f64>,
    p: f64,
}

fn naive_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn naive_sample_var(xs: &[f64]) -> f64 {
    let m = naive_mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - m) * (x - m);
    }
    s / (xs.len() as f64 - 1.0)
}

/// Direct nested-loop formulas with sentiment labels flagged below zero.
fn expected_for(terms: &[Vec<f64>], controls: &[f64]) -> Expected {
    let contexts = controls.len();
    let flagged = |s: f64| s < 0.0;

    let mut sense_sum = 0.0;
    for column in terms {
        let mut d = 0.0;
        for i in 0..contexts {
            d += column[i] - controls[i];
        }
        sense_sum += d / contexts as f64;
    }
    let sense = sense_sum / terms.len() as f64;

    let dev = (terms.len() >= 2).then(|| {
        let mut total = 0.0;
        for i in 0..contexts {
            let row: Vec<f64> = terms.iter().map(|col| col[i]).collect();
            let m = naive_mean(&row);
            let mut v = 0.0;
            for x in &row {
                v += (x - m) * (x - m);
            }
            total += (v / row.len() as f64).sqrt();
        }
        total / contexts as f64
    });

    let mut dist_sum = 0.0;
    let mut flips = 0usize;
    for column in terms {
        let (mut inter, mut union) = (0usize, 0usize);
        for i in 0..contexts {
            let (a, b) = (flagged(controls[i]), flagged(column[i]));
            inter += usize::from(a && b);
            union += usize::from(a || b);
            flips += usize::from(!a && b);
        }
        dist_sum += if union == 0 { 0.0 } else { 1.0 - inter as f64 / union as f64 };
    }
    let dist = dist_sum / terms.len() as f64;
    let pooled: Vec<f64> = terms.iter().flatten().copied().collect();
    let flip = flips as f64 / pooled.len() as f64;
    let mean = naive_mean(&pooled);

    let (t, df, p);
    let (na, nb) = (pooled.len() as f64, controls.len() as f64);
    if pooled.len() < 2 || controls.len() < 2 {
        (t, df, p) = (None, None, 1.0);
    } else {
        let (sa, sb) = (naive_sample_var(&pooled) / na, naive_sample_var(controls) / nb);
        if sa + sb == 0.0 {
            t = None;
            df = None;
            p = if naive_mean(&pooled) == naive_mean(controls) { 1.0 } else { 0.0 };
        } else {
            let tt = (naive_mean(&pooled) - naive_mean(controls)) / (sa + sb).sqrt();
            let dd = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            let dist = StudentsT::new(0.0, 1.0, dd).expect("valid df");
            p = 2.0 * dist.cdf(-tt.abs());
            t = Some(tt);
            df = Some(dd);
        }
    }
    Expected { sense, dev, dist, flip, mean, t, df, p }
}

fn metric_oracle() -> Outcome {
    const CORPORA: usize = 1000;
    const TOL: f64 = 1e-12;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let model = ModelDescriptor::builtin("oracle");
    let options = AnalysisOptions { threshold: 0.0, test: TestVariant::Welch };
    let mut rows_checked = 0usize;
    for case in 0..CORPORA {
        let corpus = random_corpus(&mut rng);
        let order: Vec<String> = corpus.groups.iter().map(|(g, _)| g.clone()).collect();
        let analysis = analyze_model(&corpus.instances, &corpus.scores, &model, "fp", &order, &options)
            .map_err(|e| format!("corpus {case}: {e}"))?;
        check(analysis.rows.len() == corpus.groups.len(), || format!("corpus {case}: wrong row count"))?;
        for (row, (group_id, terms)) in analysis.rows.iter().zip(&corpus.groups) {
            let want = expected_for(terms, &corpus.controls);
            let at = |what: &str, got: f64, w: f64| format!("corpus {case} group {group_id} {what}: got {got} want {w}");
            check(&row.group_id == group_id, || format!("corpus {case}: group order"))?;
            check(close(row.score_sense, want.sense, TOL), || at("score_sense", row.score_sense, want.sense))?;
            match (row.score_dev, want.dev) {
                (Some(g), Some(w)) => check(close(g, w, TOL), || at("score_dev", g, w))?,
                (None, None) => {}
                (g, w) => return Err(format!("corpus {case} group {group_id} score_dev: got {g:?} want {w:?}")),
            }
            check(close(row.label_dist, want.dist, TOL), || at("label_dist", row.label_dist, want.dist))?;
            check(close(row.label_flip_rate, want.flip, TOL), || at("flip_rate", row.label_flip_rate, want.flip))?;
            check(close(row.mean_score, want.mean, TOL), || at("mean_score", row.mean_score, want.mean))?;
            match (row.t_stat, want.t) {
                (Some(g), Some(w)) => check(close(g, w, TOL), || at("t", g, w))?,
                (None, None) => {}
                (g, w) => return Err(format!("corpus {case} group {group_id} t: got {g:?} want {w:?} (df {:?})", want.df)),
            }
            check(close(row.p_value, want.p, TOL), || at("p", row.p_value, want.p))?;
            check(row.significance == Significance::from_p(row.p_value), || format!("corpus {case}: stars"))?;
            check(row.bias_indicated == (row.significance != Significance::None && want.sense < 0.0), || {
                format!("corpus {case}: bias_indicated")
            })?;
            check(row.n_pairs == terms.len() * corpus.controls.len(), || format!("corpus {case}: n_pairs"))?;
            rows_checked += 1;
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    println!("    {CORPORA} corpora, {rows_checked} group rows, {elapsed:?}");
    Ok(())
}

// ---------------------------------------------------------------- spot checks

fn jaccard_spot_checks() -> Outcome {
    let set = |xs: &[u32]| xs.iter().copied().collect::<BTreeSet<u32>>();
    let cases: [(&[u32], &[u32], f64); 5] = [
        (&[], &[], 0.0),
        (&[1], &[], 1.0),
        (&[1, 2], &[1, 2], 0.0),
        (&[1, 2], &[2, 3], 2.0 / 3.0),
        (&[1, 2, 3, 4], &[4], 0.75),
    ];
    for (a, b, want) in cases {
        let got = jaccard_distance(&set(a), &set(b));
        check(close(got, want, 1e-15), || format!("{a:?} vs {b:?}: got {got} want {want}"))?;
        let back = jaccard_distance(&set(b), &set(a));
        check(got == back, || format!("{a:?} vs {b:?}: not symmetric"))?;
    }
    let mean = label_dist(&set(&[1, 2]), &[set(&[1, 2]), set(&[2, 3]), set(&[])]);
    check(close(mean, (0.0 + 2.0 / 3.0 + 1.0) / 3.0, 1e-15), || format!("label_dist mean {mean}"))
}

fn welch_reference() -> Outcome {
    let r = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    check((r.t - -3.6742346141747673).abs() < 1e-3, || format!("t = {}", r.t))?;
    check((r.p - 0.021311641128756727).abs() < 1e-3, || format!("p = {}", r.p))?;
    let same = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    check(same.t == 0.0 && same.p == 1.0, || format!("identical samples gave t={} p={}", same.t, same.p))?;
    let probes = [
        (0.0009, Significance::DoubleStar),
        (0.001, Significance::Star),
        (0.009, Significance::Star),
        (0.01, Significance::None),
        (0.5, Significance::None),
    ];
    for (p, want) in probes {
        let got = Significance::from_p(p);
        check(got == want, || format!("p={p}: got {got:?} want {want:?}"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- corpus

/// Instance count derived straight from the shipped lexicon JSON: every
/// template contributes one context per distinct slot word (one if it has no
/// slot), and each context yields a control plus one sentence per term.
fn independent_count() -> usize {
    let lexicon: serde_json::Value = serde_json::from_str(bits_core::DEFAULT_LEXICON_JSON).unwrap();
    let words = |field: &str| -> usize {
        let all: BTreeSet<&str> = lexicon["emotions"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|e| e[field].as_array().unwrap().iter().map(|w| w.as_str().unwrap()))
            .collect();
        all.len()
    };
    let terms: usize = lexicon["groups"].as_array().unwrap().iter().map(|g| g["terms"].as_array().unwrap().len()).sum();
    let contexts: usize = lexicon["templates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let pattern = t["pattern"].as_str().unwrap();
            if pattern.contains("<emotional word>") {
                words("emotional_words")
            } else if pattern.contains("<event word>") {
                words("event_words")
            } else {
                1
            }
        })
        .sum();
    contexts * (1 + terms)
}

fn corpus_counts() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cwd = dir.path();
    for out in ["a", "b"] {
        let o = common::run_bits(cwd, &["generate", "--templates", "T1..T5", "--out", out]);
        check(o.status.success(), || common::stderr(&o))?;
    }
    let a = std::fs::read_to_string(cwd.join("a/corpus.jsonl")).map_err(|e| e.to_string())?;
    let b = std::fs::read_to_string(cwd.join("b/corpus.jsonl")).map_err(|e| e.to_string())?;
    check(a == b, || "neutral corpus differs between runs".into())?;
    let instances: Vec<SentenceInstance> = a.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let controls = instances.iter().filter(|i| i.is_control()).count();
    check(instances.len() == 105 && controls == 5, || format!("{} instances, {controls} controls", instances.len()))?;

    let o = common::run_bits(cwd, &["generate", "--out", "full"]);
    check(o.status.success(), || common::stderr(&o))?;
    let n = std::fs::read_to_string(cwd.join("full/corpus.jsonl")).map_err(|e| e.to_string())?.lines().count();
    let want = independent_count();
    check(n == want, || format!("full corpus has {n} instances, lexicon implies {want}"))?;
    let announced = format!("closed-form count: {want} ");
    check(common::stdout(&o).contains(&announced), || format!("missing {announced:?} in {}", common::stdout(&o)))?;
    println!("    full corpus: {n} instances");
    Ok(())
}

// ---------------------------------------------------------------- planted audit

fn planted_audit() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cwd = dir.path();
    let config = serde_json::json!({
        "models": [{
            "model_id": "planted",
            "kind": "sentiment",
            "transport": "builtin",
            "endpoint": common::fixture("planted_valence.json"),
        }],
    });
    std::fs::write(cwd.join("bits.json"), config.to_string()).map_err(|e| e.to_string())?;
    let o = common::run_bits(cwd, &["audit"]);
    check(o.status.success(), || common::stderr(&o))?;
    let out = cwd.join("bits-out");
    for name in ["report.json", "groups.csv", "per_term.csv", "per_template.csv", "report.md"] {
        check(out.join(name).is_file(), || format!("{name} missing"))?;
    }
    let report = bits::emit::load_report(&out.join("report.json")).map_err(|e| e.to_string())?;
    let row = |g: &str| report.rows.iter().find(|r| r.group_id == g).ok_or_else(|| format!("no row for {g}"));
    for g in ["PWD:C", "PWD:SD"] {
        let r = row(g)?;
        check(r.score_sense < 0.0 && r.significance == Significance::DoubleStar && r.bias_indicated, || {
            format!("{g}: sense {} p {} {:?}", r.score_sense, r.p_value, r.significance)
        })?;
        println!("    {g}: {} (p = {:.2e})", bits_core::format_cell(r.score_sense, r.significance), r.p_value);
    }
    for g in ["PWoD", "NRMA"] {
        let r = row(g)?;
        check(r.score_sense.abs() < 0.02, || format!("{g}: sense {}", r.score_sense))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- protocol

fn protocol_conformance() -> Outcome {
    let mut failures = Vec::new();
    let cases = common::protocol_cases();
    for (name, case) in &cases {
        if let Err(e) = case() {
            failures.push(format!("{name}: {e}"));
        }
    }
    println!("    {} transcripts", cases.len());
    check(failures.is_empty(), || failures.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("metric oracle over 1000 random corpora", metric_oracle),
        ("jaccard distance spot checks", jaccard_spot_checks),
        ("welch t-test reference and significance stars", welch_reference),
        ("corpus determinism and closed-form count", corpus_counts),
        ("planted-bias audit end to end", planted_audit),
        ("scorer protocol conformance", protocol_conformance),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        match criterion() {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
