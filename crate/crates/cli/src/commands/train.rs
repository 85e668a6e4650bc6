use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;

use nnrs_core::trainer::{read_decisions, write_decisions, write_records, DecisionRow, TrainOptions};
use nnrs_core::{Checkpoint, EpochRecord, TrainData, Trainer};

use super::load_config;
use crate::args::TrainArgs;
use crate::failure::{usage, CmdResult, Context, Failure};
use crate::manifest::{file_sha256, unix_now, write_atomic, DirLock, RunManifest};

const MANIFEST: &str = "manifest.json";
const RECORDS: &str = "records.csv";
const CHECKPOINT: &str = "checkpoint.bin";
const VOCAB: &str = "vocab.tsv";
const DECISIONS: &str = "decisions.csv";

fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> CmdResult {
    let mut buf = Vec::new();
    ckpt.write(&mut buf).or_runtime("encoding checkpoint")?;
    write_atomic(path, &buf)
}

fn save_records(records: &[EpochRecord], path: &Path) -> CmdResult {
    let mut buf = Vec::new();
    write_records(records, &mut buf).or_runtime("encoding records")?;
    write_atomic(path, &buf)
}

/// Appends to the rows of an earlier invocation when resuming.
fn save_decisions(mut rows: Vec<DecisionRow>, path: &Path, append: bool) -> CmdResult {
    if append && path.exists() {
        let f = File::open(path).or_runtime(format!("opening {}", path.display()))?;
        let mut old = read_decisions(f)?;
        old.append(&mut rows);
        rows = old;
    }
    let mut buf = Vec::new();
    write_decisions(&rows, &mut buf).or_runtime("encoding decisions")?;
    write_atomic(path, &buf)
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let mut cfg = load_config(&a.config)?;
    if let Some(o) = &a.out {
        cfg.output_dir = Some(o.clone());
    }
    let out = cfg
        .output_dir
        .clone()
        .ok_or_else(|| usage("no output directory: set output_dir in the config or pass --out"))?;
    if a.stop_after == Some(0) {
        return Err(usage("--stop-after must be at least 1"));
    }
    let trace = cfg.trace || a.trace;

    let mut inputs = BTreeMap::new();
    for p in [&cfg.train, &cfg.valid, &cfg.test, &cfg.embeddings].into_iter().flatten() {
        inputs.insert(p.display().to_string(), file_sha256(p)?);
    }
    let mut id_cfg = cfg.clone();
    id_cfg.output_dir = None;
    id_cfg.trace = false;
    let mut manifest = RunManifest::new(id_cfg.to_text(), cfg.seed, inputs);

    fs::create_dir_all(&out).or_runtime(format!("creating {}", out.display()))?;
    let _lock = DirLock::acquire(&out)?;
    let path = |name: &str| out.join(name);
    let data = TrainData::load(&cfg)?;

    let ckpt_path = path(CHECKPOINT);
    let mut trainer = if a.resume {
        let ckpt = Checkpoint::load(&ckpt_path)?;
        if ckpt.manifest_id != manifest.id {
            return Err(usage(format!(
                "{} belongs to run {}, but this config and its inputs describe run {}",
                ckpt_path.display(),
                ckpt.manifest_id,
                manifest.id
            )));
        }
        if let Ok(prev) = RunManifest::load(&path(MANIFEST)) {
            manifest.started_unix = prev.started_unix;
        }
        Trainer::resume(&cfg, &data, &ckpt)?
    } else {
        if ckpt_path.exists() {
            return Err(usage(format!(
                "{} already holds a checkpoint; pass --resume or pick another output directory",
                out.display()
            )));
        }
        Trainer::new(&cfg, &data)?
    };

    let mut names = vec![MANIFEST, RECORDS, CHECKPOINT, VOCAB];
    if trace {
        names.push(DECISIONS);
    }
    for n in names {
        manifest.outputs.insert(n.to_string(), path(n).display().to_string());
    }
    manifest.epochs_done = trainer.epochs_done();
    manifest.save(&path(MANIFEST))?;
    let mut buf = Vec::new();
    data.vocab.write_tsv(&mut buf).or_runtime("encoding vocabulary")?;
    write_atomic(&path(VOCAB), &buf)?;

    let id = manifest.id.clone();
    let mut saved: CmdResult = Ok(());
    let result = trainer.run(
        &data,
        TrainOptions {
            stop_after: a.stop_after,
            trace,
        },
        |t| {
            // an I/O failure here stops the run at the next epoch boundary
            saved = save_checkpoint(&t.checkpoint(&data.vocab, &id), &ckpt_path)
                .and_then(|()| save_records(t.records(), &path(RECORDS)));
            match &saved {
                Ok(()) => Ok(()),
                Err(_) => Err(nnrs_core::Error::Io(std::io::Error::other("saving run outputs"))),
            }
        },
    );
    saved?;
    save_records(trainer.records(), &path(RECORDS))?;
    manifest.epochs_done = trainer.epochs_done();
    manifest.finished_unix = Some(unix_now());
    match result {
        Ok(rows) => {
            if trace {
                save_decisions(rows, &path(DECISIONS), a.resume)?;
            }
            manifest.status = if trainer.is_finished() { "complete" } else { "stopped" }.into();
            manifest.save(&path(MANIFEST))?;
            if let Some(r) = trainer.records().last() {
                log::info!(
                    "run {id}: {} of {} epochs, val ppl {:.3} (best {:.3})",
                    trainer.epochs_done(),
                    cfg.epochs,
                    r.val_ppl,
                    r.best_val_ppl
                );
            }
            Ok(())
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.save(&path(MANIFEST))?;
            Err(Failure::from(e))
        }
    }
}
