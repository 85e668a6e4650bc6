use std::fs;
use std::io::Write;

use nnrs_core::metrics::{evaluate_model, write_reports, EvalOptions, KlForm};
use nnrs_core::trainer::write_decisions;
use nnrs_core::{kl_decomposition, Checkpoint, LstmLm, Metric, Schedule, ToyChain, TrainConfig, TrainData, Trainer};

use super::{load_config, output};
use crate::args::{EvalArgs, FormArg, KlArgs, ScheduleArgs, TraceArgs};
use crate::failure::{usage, CmdResult, Context};

pub fn eval(a: &EvalArgs) -> CmdResult {
    let metrics = Metric::parse_list(&a.metrics)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let cfg = TrainConfig::parse(&ckpt.config)?;
    let data = TrainData::load(&cfg)?;
    ckpt.check_vocab(&data.vocab)?;
    let model = LstmLm::from_params(ckpt.dims, ckpt.params.clone())?;
    let ids = data.split(&a.split)?;
    let opts = EvalOptions {
        prefix_len: a.prefix,
        continuation_len: a.continuation,
        batch_size: a.batch,
        bptt: cfg.bptt,
    };
    let label = a.label.clone().unwrap_or_else(|| cfg.mode.to_string());
    let mut reports = evaluate_model(&model, ids, &data.embeddings, &metrics, &opts, &a.split, &label)?;
    for r in &mut reports {
        if r.metric.contains("bleu") {
            r.value *= 100.0;
        }
    }
    write_reports(&reports, output(None)?).or_runtime("writing report")
}

pub fn schedule_emit(a: &ScheduleArgs) -> CmdResult {
    if a.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    let s = Schedule::new(a.kind, a.start, a.end)?;
    let mut w = output(None)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "epoch,z,rate")?;
        for i in 0..=a.epochs {
            let z = i as f64 / a.epochs as f64;
            writeln!(w, "{i},{z},{}", s.rate(z))?;
        }
        w.flush()
    };
    emit().or_runtime("writing schedule")
}

pub fn sample_trace(a: &TraceArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let data = TrainData::load(&cfg)?;
    let mut t = match &a.checkpoint {
        Some(p) => Trainer::resume(&cfg, &data, &Checkpoint::load(p)?)?,
        None => Trainer::new(&cfg, &data)?,
    };
    let rows = t.trace_epoch(a.epoch)?;
    write_decisions(&rows, output(a.out.as_ref())?).or_runtime("writing trace")
}

fn read_chain(path: &std::path::Path) -> CmdResult<ToyChain> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    ToyChain::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn kl_diag(a: &KlArgs) -> CmdResult {
    let (p, q) = (read_chain(&a.p)?, read_chain(&a.q)?);
    let form = match a.form {
        FormArg::Conditional => KlForm::Conditional,
        FormArg::Printed => KlForm::AsPrinted,
    };
    let terms = kl_decomposition(&p, &q, a.eps, a.gamma, form)?;
    let mut w = output(None)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "term,value")?;
        for (name, v) in terms.named() {
            writeln!(w, "{name},{v}")?;
        }
        w.flush()
    };
    emit().or_runtime("writing terms")
}
