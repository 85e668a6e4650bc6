use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nnrs_core::neighbors::{NeighborTable, TransitionTable};
use nnrs_core::synth::{self, SynthCorpus};
use nnrs_core::trainer::{read_decisions, read_records};
use nnrs_core::{Checkpoint, Schedule, ScheduleKind, TokenSource, Vocabulary};
use tempfile::TempDir;

fn nnrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnrs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One split per file, all on a single line so the only `<eos>` is at the end.
fn write_corpus(dir: &Path, c: &SynthCorpus) {
    for (name, toks) in [("train.txt", &c.train), ("valid.txt", &c.valid), ("test.txt", &c.test)] {
        fs::write(dir.join(name), toks.join(" ") + "\n").unwrap();
    }
    fs::write(dir.join("vectors.txt"), c.word2vec_text()).unwrap();
}

fn chain_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    let c = synth::deterministic_chain(12, [1200, 200, 200], 8, 3).unwrap();
    write_corpus(dir.path(), &c);
    dir
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let text = format!(
        "# small run\ntrain = train.txt\nvalid = valid.txt\ntest = test.txt\n\
         embeddings = vectors.txt\nembed_dim = 8\nhidden = 16\nlayers = 1\n\
         batch_size = 4\nbptt = 10\nbase_lr = 10\nclip = 0.5\nk = 3\n{extra}"
    );
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn index_build_is_deterministic_and_loadable() {
    let dir = chain_dir();
    let d = dir.path();
    let (a, b) = (d.join("a"), d.join("b"));
    for out in [&a, &b] {
        let o = nnrs(&[
            "index", "build", "--corpus", s(&d.join("train.txt")), "--embeddings",
            s(&d.join("vectors.txt")), "--dim", "8", "--k", "3", "--out", s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["vocab.tsv", "neighbors.csv", "transitions.csv", "index_stats.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let vocab = Vocabulary::read_tsv(fs::read(a.join("vocab.tsv")).unwrap().as_slice()).unwrap();
    let n = vocab.len();
    let table = NeighborTable::read_csv(fs::File::open(a.join("neighbors.csv")).unwrap(), n, 0.5).unwrap();
    assert_eq!(table.k(), 3);
    TransitionTable::read_csv(fs::File::open(a.join("transitions.csv")).unwrap(), n).unwrap();
    let stats: serde_json::Value = serde_json::from_slice(&fs::read(a.join("index_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["vocab_size"], n);
    assert_eq!(stats["k"], 3);
}

#[test]
fn index_rejects_bad_arguments() {
    let dir = chain_dir();
    let d = dir.path();
    let corpus = d.join("train.txt");
    let o = nnrs(&["index", "build", "--corpus", s(&corpus), "--k", "0", "--dim", "8", "--out", s(d)]);
    assert_eq!(code(&o), 2);
    let o = nnrs(&["index", "build", "--corpus", s(&d.join("missing.txt")), "--out", s(d)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.txt"));
    let o = nnrs(&["index", "build", "--corpus"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn schedule_emit_rows() {
    let o = nnrs(&["schedule", "emit", "--kind", "static", "--start", "0.2", "--end", "0.2", "--epochs", "40"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "epoch,z,rate");
    assert_eq!(lines.len(), 42);
    assert!(lines[1..].iter().all(|l| l.ends_with(",0.2")));

    let o = nnrs(&["schedule", "emit", "--kind", "exponential", "--start", "0", "--end", "0.5", "--epochs", "40"]);
    let sched = Schedule::new(ScheduleKind::Exponential, 0.0, 0.5).unwrap();
    for (i, line) in stdout(&o).lines().skip(1).enumerate() {
        let rate: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(rate, sched.rate(i as f64 / 40.0));
    }
    assert_eq!(code(&nnrs(&["schedule", "emit", "--kind", "wavy", "--end", "0.5", "--epochs", "4"])), 2);
    assert_eq!(code(&nnrs(&["schedule", "emit", "--kind", "linear", "--end", "1.5", "--epochs", "4"])), 2);
}

#[test]
fn train_writes_run_outputs() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(d, "mle.cfg", "epochs = 3\noutput_dir = run\n");
    let o = nnrs(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = d.join("run");
    let records = read_records(fs::File::open(run.join("records.csv")).unwrap()).unwrap();
    assert_eq!(records.iter().map(|r| r.epoch).collect::<Vec<_>>(), [1, 2, 3]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 4);
    let ckpt = Checkpoint::load(&run.join("checkpoint.bin")).unwrap();
    assert_eq!(ckpt.manifest_id, manifest["id"].as_str().unwrap());
    assert_eq!(ckpt.epochs_done, 3);
    assert!(run.join("vocab.tsv").exists());
    assert!(!run.join(".nnrs.lock").exists());
    assert!(!run.join("decisions.csv").exists());

    // a second fresh run into the same directory is refused
    let o = nnrs(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn rate_columns_follow_the_schedules() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(
        d,
        "ssnnrs.cfg",
        "epochs = 4\nmode = ss_nnrs\nss_schedule = linear\nss_start = 0\nss_end = 0.5\n\
         nnrs_schedule = static\nnnrs_end = 0.2\n",
    );
    let o = nnrs(&["train", "--config", s(&cfg), "--out", s(&d.join("out"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let records = read_records(fs::File::open(d.join("out/records.csv")).unwrap()).unwrap();
    let ss = Schedule::new(ScheduleKind::Linear, 0.0, 0.5).unwrap();
    for r in &records {
        let z = r.epoch as f64 / 4.0;
        assert_eq!(r.epsilon, ss.rate(z));
        assert_eq!(r.gamma, 0.2);
    }
}

#[test]
fn interrupted_run_resumes_identically() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(d, "nnrs.cfg", "epochs = 4\nmode = nnrs\nnnrs_end = 0.3\ntrace = true\n");
    let (full, split) = (d.join("full"), d.join("split"));
    assert_eq!(code(&nnrs(&["train", "--config", s(&cfg), "--out", s(&full)])), 0);
    let o = nnrs(&["train", "--config", s(&cfg), "--out", s(&split), "--stop-after", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(split.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "stopped");
    let o = nnrs(&["train", "--config", s(&cfg), "--out", s(&split), "--resume"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let load = |p: &Path| {
        read_records(fs::File::open(p.join("records.csv")).unwrap())
            .unwrap()
            .iter()
            .map(|r| r.without_timing())
            .collect::<Vec<_>>()
    };
    assert_eq!(load(&full), load(&split));
    let (a, b) = (
        Checkpoint::load(&full.join("checkpoint.bin")).unwrap(),
        Checkpoint::load(&split.join("checkpoint.bin")).unwrap(),
    );
    assert_eq!(a.params, b.params);
    let da = read_decisions(fs::File::open(full.join("decisions.csv")).unwrap()).unwrap();
    let db = read_decisions(fs::File::open(split.join("decisions.csv")).unwrap()).unwrap();
    assert_eq!(da, db);
}

#[test]
fn resume_needs_a_matching_checkpoint() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(d, "a.cfg", "epochs = 2\n");
    let out = d.join("r");
    assert_eq!(code(&nnrs(&["train", "--config", s(&cfg), "--out", s(&out), "--resume"])), 2);
    assert_eq!(code(&nnrs(&["train", "--config", s(&cfg), "--out", s(&out), "--stop-after", "1"])), 0);
    let other = write_config(d, "b.cfg", "epochs = 2\nseed = 9\n");
    let o = nnrs(&["train", "--config", s(&other), "--out", s(&out), "--resume"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("belongs to run"), "{}", stderr(&o));
}

#[test]
fn config_errors_are_usage_errors() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(d, "bad.cfg", "epochs = 2\nlearning_rate = 3\n");
    let o = nnrs(&["train", "--config", s(&cfg), "--out", s(&d.join("x"))]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("learning_rate") && err.contains("base_lr"), "{err}");

    let cfg = write_config(d, "k0.cfg", "epochs = 2\nk = 0\n");
    assert_eq!(code(&nnrs(&["train", "--config", s(&cfg), "--out", s(&d.join("y"))])), 2);
    assert_eq!(code(&nnrs(&["train", "--config", s(&d.join("nope.cfg"))])), 2);
    let cfg = write_config(d, "noout.cfg", "epochs = 2\n");
    assert_eq!(code(&nnrs(&["train", "--config", s(&cfg)])), 2);
}

#[test]
fn locked_directory_is_refused() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(d, "a.cfg", "epochs = 1\n");
    let out = d.join("busy");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".nnrs.lock"), "1\n").unwrap();
    let o = nnrs(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("in use"));
}

#[test]
fn divergence_is_a_runtime_failure() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(d, "hot.cfg", "epochs = 3\n");
    let text = fs::read_to_string(&cfg).unwrap().replace("base_lr = 10", "base_lr = 100000").replace("clip = 0.5", "clip = 0");
    fs::write(&cfg, text).unwrap();
    let out = d.join("hot");
    let o = nnrs(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "failed");
}

#[test]
fn zero_rate_trace_is_all_teacher() {
    let dir = chain_dir();
    let d = dir.path();
    let cfg = write_config(d, "t.cfg", "epochs = 2\nmode = ss_nnrs\n");
    let out = d.join("trace.csv");
    let o = nnrs(&["sample", "trace", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_decisions(fs::File::open(&out).unwrap()).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.source == TokenSource::Teacher && r.chosen_id == r.teacher_id));
    assert_eq!(code(&nnrs(&["sample", "trace", "--config", s(&cfg), "--epoch", "9"])), 2);
}

#[test]
fn memorizing_model_scores_full_bleu() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    // every split walks the same cycle, so a model of the cycle reproduces the test set
    let c = synth::deterministic_chain(10, [1500, 200, 200], 8, 5).unwrap();
    write_corpus(d, &c);
    let cfg = write_config(d, "mem.cfg", "epochs = 25\nhidden = 24\n");
    let run = d.join("mem");
    let o = nnrs(&["train", "--config", s(&cfg), "--out", s(&run)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = nnrs(&[
        "eval", "--checkpoint", s(&run.join("checkpoint.bin")), "--split", "test", "--metrics", "bleu,wmd,ppl",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("metric,split,value,config"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][..2], ["bleu4", "test"]);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 100.0);
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 1.0);
    assert!(rows[2][2].parse::<f64>().unwrap() < 1.1);
    assert_eq!(rows[0][3], "mle");

    let o = nnrs(&["eval", "--checkpoint", s(&run.join("checkpoint.bin")), "--metrics", "bleu,nope"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn kl_diag_prints_terms() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("p.txt"), "0.9 0.1\n0.2 0.8\n").unwrap();
    fs::write(d.join("q.txt"), "# model\n0.6 0.4\n0.5 0.5\n").unwrap();
    let (p, q) = (d.join("p.txt"), d.join("q.txt"));
    let o = nnrs(&["kl-diag", "--p", s(&p), "--q", s(&p), "--eps", "0.5", "--gamma", "0.5"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 7);
    assert!(out.lines().all(|l| l == "term,value" || l.ends_with(",0")), "{out}");
    let o = nnrs(&["kl-diag", "--p", s(&p), "--q", s(&q), "--eps", "0.5", "--gamma", "0.2", "--form", "printed"]);
    assert_eq!(code(&o), 0);
    let total: f64 = stdout(&o).lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(total > 0.0);
    fs::write(d.join("bad.txt"), "1 0\n0.5 0.5\n").unwrap();
    let o = nnrs(&["kl-diag", "--p", s(&d.join("bad.txt")), "--q", s(&q), "--eps", "0.5", "--gamma", "0.5"]);
    assert_eq!(code(&o), 2);
}
