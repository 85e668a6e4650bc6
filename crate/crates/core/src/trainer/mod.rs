//! Training loop: per-epoch rates, per-batch token sources, clipped SGD,
//! teacher-forced validation and the temperature or Gumbel update.

mod batch;
mod checkpoint;
mod config;

pub use batch::{make_batches, Batch};
pub use checkpoint::{Checkpoint, GumbelState};
pub use config::{TrainConfig, KEYS};

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{load_embeddings, random_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::model::{
    argmax, cosine_lr, predict, Decoding, Gradients, LstmLm, LstmState, ModelDims, Sgd, StepInput,
    Tape,
};
use crate::neighbors::{default_k, NeighborTable, ReplacementSource, TransitionTable};
use crate::policy::{straight_through_grad, GumbelLogits, Mode, PolicyState, TokenSource};
use crate::rng::{self, Stream};
use crate::schedule::{rates_for_epoch, Schedule};
use crate::vocab::{tokenize, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub tau: f64,
    pub train_loss: f64,
    pub val_ppl: f64,
    pub best_val_ppl: f64,
    pub lr: f64,
    pub wall_time: f64,
}

impl EpochRecord {
    /// Copy with `wall_time` zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

pub fn write_records<W: Write>(records: &[EpochRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    if records.is_empty() {
        out.write_record([
            "epoch",
            "epsilon",
            "gamma",
            "tau",
            "train_loss",
            "val_ppl",
            "best_val_ppl",
            "lr",
            "wall_time",
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<EpochRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// One fed input token. `seq` is the stream index within the mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionRow {
    pub epoch: usize,
    pub step: usize,
    pub t: usize,
    pub source: TokenSource,
    pub teacher_id: usize,
    pub chosen_id: usize,
    pub seq: usize,
}

pub fn write_decisions<W: Write>(rows: &[DecisionRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "step", "t", "source", "teacher_id", "chosen_id", "seq"])?;
    for r in rows {
        out.write_record([
            r.epoch.to_string(),
            r.step.to_string(),
            r.t.to_string(),
            r.source.to_string(),
            r.teacher_id.to_string(),
            r.chosen_id.to_string(),
            r.seq.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_decisions<R: Read>(r: R) -> Result<Vec<DecisionRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |j: usize| -> Result<&str> {
            rec.get(j).ok_or(Error::Parse {
                line,
                msg: format!("missing column {j}"),
            })
        };
        let int = |j: usize| -> Result<usize> {
            field(j)?.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("column {j} is not an integer"),
            })
        };
        rows.push(DecisionRow {
            epoch: int(0)?,
            step: int(1)?,
            t: int(2)?,
            source: field(3)?.parse()?,
            teacher_id: int(4)?,
            chosen_id: int(5)?,
            seq: int(6)?,
        });
    }
    Ok(rows)
}

/// Encoded splits plus the embeddings the model and neighbor table start from.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub vocab: Vocabulary,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub embeddings: EmbeddingMatrix,
}

fn read_tokens(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(tokenize(&text))
}

impl TrainData {
    /// Builds the vocabulary on `train` and encodes every split with it.
    pub fn from_tokens<S: AsRef<str>>(
        train: &[S],
        valid: &[S],
        test: &[S],
        min_count: u64,
        embeddings: impl FnOnce(&Vocabulary) -> Result<EmbeddingMatrix>,
    ) -> Result<Self> {
        let vocab = Vocabulary::build(train, min_count)?;
        let embeddings = embeddings(&vocab)?;
        Self::from_ids(
            vocab.encode(train),
            vocab.encode(valid),
            vocab.encode(test),
            embeddings,
            vocab,
        )
    }

    pub fn from_ids(
        train: Vec<usize>,
        valid: Vec<usize>,
        test: Vec<usize>,
        embeddings: EmbeddingMatrix,
        vocab: Vocabulary,
    ) -> Result<Self> {
        let v = vocab.len();
        if embeddings.rows() != v {
            return Err(Error::ShapeMismatch {
                expected: v,
                found: embeddings.rows(),
            });
        }
        for &id in train.iter().chain(&valid).chain(&test) {
            if id >= v {
                return Err(Error::IdOutOfRange { id, size: v });
            }
        }
        Ok(Self {
            vocab,
            train,
            valid,
            test,
            embeddings,
        })
    }

    /// Reads the corpus files and embeddings named in `cfg`. Without an
    /// embeddings file every row is a seeded random vector.
    pub fn load(cfg: &TrainConfig) -> Result<Self> {
        let need = |p: &Option<std::path::PathBuf>, key: &str| {
            p.clone()
                .ok_or_else(|| Error::invalid(format!("config key {key} is required")))
        };
        let train = read_tokens(&need(&cfg.train, "train")?)?;
        let valid = read_tokens(&need(&cfg.valid, "valid")?)?;
        let test = match &cfg.test {
            Some(p) => read_tokens(p)?,
            None => Vec::new(),
        };
        let (dim, seed) = (cfg.embed_dim, cfg.seed);
        TrainData::from_tokens(&train, &valid, &test, cfg.min_count, |vocab| {
            match &cfg.embeddings {
                Some(p) => load_embeddings(p, vocab, dim, seed),
                None => random_embeddings(vocab.len(), dim, seed),
            }
        })
    }

    pub fn split(&self, name: &str) -> Result<&[usize]> {
        match name {
            "train" => Ok(&self.train),
            "valid" | "validation" => Ok(&self.valid),
            "test" => Ok(&self.test),
            other => Err(Error::invalid(format!(
                "unknown split {other:?} (train, valid, test)"
            ))),
        }
    }
}

/// Summed teacher-forced negative log-likelihood over `ids` as one stream,
/// and the number of predicted tokens.
pub fn evaluate_nll(model: &LstmLm, ids: &[usize], bptt: usize) -> Result<(f64, usize)> {
    if ids.len() < 2 {
        return Err(Error::invalid("evaluation split needs at least two tokens"));
    }
    let bptt = bptt.max(1);
    let mut state = model.initial_state();
    let mut total = 0.0;
    let mut i = 0;
    while i + 1 < ids.len() {
        let len = bptt.min(ids.len() - 1 - i);
        let tape = model.forward_ids(&ids[i..i + len], state)?;
        total += tape.sum_nll(&ids[i + 1..i + 1 + len])?;
        state = tape.state().clone();
        i += len;
    }
    Ok((total, ids.len() - 1))
}

/// Teacher-forced perplexity; never touches the parameters.
pub fn validate(model: &LstmLm, ids: &[usize], bptt: usize) -> Result<f64> {
    let (nll, n) = evaluate_nll(model, ids, bptt)?;
    Ok((nll / n as f64).exp())
}

/// Simulated interruption and tracing for [`Trainer::run`].
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Stop once this many epochs are complete in total.
    pub stop_after: Option<usize>,
    pub trace: bool,
}

struct SeqCtx<'a> {
    model: &'a LstmLm,
    source: Option<&'a dyn ReplacementSource>,
    table: Option<&'a NeighborTable>,
    gumbel: Option<&'a GumbelLogits>,
    tau: f64,
    decoding: Decoding,
    learn: bool,
    record: bool,
    scale: f64,
}

struct SeqOutcome {
    grads: Option<Gradients>,
    nll: f64,
    state: LstmState,
    prev: Option<usize>,
    decisions: Vec<(usize, TokenSource, usize, usize)>,
    gumbel_grads: Vec<(usize, Vec<f64>)>,
}

fn next_prediction(log_probs: &[f64], decoding: Decoding, rng: &mut dyn RngCore) -> usize {
    match decoding {
        Decoding::Greedy => argmax(log_probs),
        Decoding::Sample => {
            let p: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
            predict(&p, decoding, rng)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_sequence(
    ctx: &SeqCtx<'_>,
    inputs: &[usize],
    targets: &[usize],
    mask: &[TokenSource],
    state: LstmState,
    mut prev: Option<usize>,
    mut rng: Stream,
) -> Result<SeqOutcome> {
    let mut tape = Tape::new(state);
    let mut decisions = Vec::new();
    let mut soft = Vec::new();
    for (t, (&teacher, &drawn)) in inputs.iter().zip(mask).enumerate() {
        let (source, chosen) = match drawn {
            TokenSource::Teacher => (TokenSource::Teacher, teacher),
            // nothing predicted yet at the very start of an epoch
            TokenSource::Prediction => match prev {
                Some(p) => (TokenSource::Prediction, p),
                None => (TokenSource::Teacher, teacher),
            },
            TokenSource::Neighbor => match (ctx.gumbel, ctx.table) {
                (Some(g), Some(table)) if table.is_valid(teacher) => {
                    let s = g.sample(teacher, ctx.tau, &mut rng);
                    let id = table.neighbors(teacher)[s.slot];
                    soft.push((t, teacher, s.soft_probs));
                    (TokenSource::Neighbor, id)
                }
                _ => {
                    let src = ctx
                        .source
                        .ok_or_else(|| Error::invalid("neighbor source drawn without a table"))?;
                    (TokenSource::Neighbor, src.sample(teacher, &mut rng))
                }
            },
        };
        if ctx.record {
            decisions.push((t, source, teacher, chosen));
        }
        let lp = ctx.model.step(&mut tape, StepInput::Id(chosen))?;
        prev = Some(next_prediction(lp, ctx.decoding, &mut rng));
    }
    let nll = tape.sum_nll(targets)?;
    let mut grads = None;
    let mut gumbel_grads = Vec::new();
    if ctx.learn {
        let mut g = Gradients::zeros(ctx.model);
        let dx = ctx.model.backward(&tape, targets, ctx.scale, &mut g)?;
        if let Some(table) = ctx.table {
            for (t, word, s) in soft {
                let grad_soft: Vec<f64> = table
                    .neighbors(word)
                    .iter()
                    .map(|&n| {
                        ctx.model
                            .embedding(n)
                            .iter()
                            .zip(&dx[t])
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect();
                gumbel_grads.push((word, straight_through_grad(&s, ctx.tau, &grad_soft)));
            }
        }
        grads = Some(g);
    }
    Ok(SeqOutcome {
        grads,
        nll,
        state: tape.state().clone(),
        prev,
        decisions,
        gumbel_grads,
    })
}

/// Owns the model, optimizer, policy and replacement tables for one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    ss: Schedule,
    nnrs: Schedule,
    model: LstmLm,
    opt: Sgd,
    policy: PolicyState,
    table: Option<NeighborTable>,
    transitions: Option<TransitionTable>,
    gumbel: Option<GumbelLogits>,
    batches: Vec<Batch>,
    epochs_done: usize,
    records: Vec<EpochRecord>,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig, data: &TrainData) -> Result<Self> {
        cfg.validate()?;
        let v = data.vocab.len();
        if data.embeddings.dim() != cfg.embed_dim {
            return Err(Error::invalid(format!(
                "embeddings have dimension {}, config says {}",
                data.embeddings.dim(),
                cfg.embed_dim
            )));
        }
        if data.valid.len() < 2 {
            return Err(Error::invalid("validation split needs at least two tokens"));
        }
        let (ss, nnrs) = cfg.schedules()?;
        let dims = ModelDims::new(v, cfg.embed_dim, cfg.hidden, cfg.layers)?;
        let mut model = LstmLm::new(dims, cfg.seed);
        model.set_embeddings(&data.embeddings)?;
        let policy = PolicyState::new(cfg.mode, cfg.tau_init, v as f64, cfg.seed);
        let k = cfg.k.unwrap_or_else(|| default_k(v));
        let table = match cfg.mode {
            Mode::Nnrs | Mode::SsNnrs | Mode::Gsns => {
                let t = NeighborTable::build(&data.embeddings, k)?;
                Some(if t.tau() != policy.tau() {
                    t.renormalize(policy.tau())?
                } else {
                    t
                })
            }
            _ => None,
        };
        let transitions = match cfg.mode {
            Mode::Tprs => Some(TransitionTable::build(&data.train, v, k)?),
            _ => None,
        };
        let gumbel = match (&table, cfg.mode) {
            (Some(t), Mode::Gsns) => Some(GumbelLogits::from_table(t, cfg.gumbel_beta)?),
            _ => None,
        };
        Ok(Self {
            cfg: cfg.clone(),
            ss,
            nnrs,
            model,
            opt: Sgd::new(cfg.momentum, cfg.clip, cfg.freeze_embeddings)?,
            policy,
            table,
            transitions,
            gumbel,
            batches: make_batches(&data.train, cfg.batch_size, cfg.bptt)?,
            epochs_done: 0,
            records: Vec::new(),
        })
    }

    /// Rebuilds a trainer from `ckpt`; continuing it gives the same
    /// trajectory as a run that was never interrupted.
    pub fn resume(cfg: &TrainConfig, data: &TrainData, ckpt: &Checkpoint) -> Result<Self> {
        ckpt.check_vocab(&data.vocab)?;
        let mut t = Self::new(cfg, data)?;
        if ckpt.dims != *t.model.dims() {
            return Err(Error::Checkpoint(format!(
                "model shape {:?} does not match config {:?}",
                ckpt.dims,
                t.model.dims()
            )));
        }
        if ckpt.epochs_done > cfg.epochs {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} epochs, config only {}",
                ckpt.epochs_done, cfg.epochs
            )));
        }
        t.model = LstmLm::from_params(ckpt.dims, ckpt.params.clone())?;
        t.opt.set_velocity(ckpt.velocity.clone());
        t.policy = PolicyState::restore(cfg.mode, ckpt.tau, ckpt.best_val, ckpt.policy_rng.restore());
        if let Some(table) = &t.table {
            if cfg.mode != Mode::Gsns && table.tau() != t.policy.tau() {
                t.table = Some(table.renormalize(t.policy.tau())?);
            }
        }
        match (&mut t.gumbel, &ckpt.gumbel) {
            (Some(g), Some(s)) => {
                *g = GumbelLogits::from_parts(s.k, s.log_alpha.clone(), s.beta)?;
            }
            (None, None) => {}
            _ => return Err(Error::Checkpoint("gumbel state does not match mode".into())),
        }
        t.epochs_done = ckpt.epochs_done;
        t.records = ckpt.records.clone();
        Ok(t)
    }

    pub fn checkpoint(&self, vocab: &Vocabulary, manifest_id: &str) -> Checkpoint {
        Checkpoint {
            vocab_hash: vocab.hash(),
            manifest_id: manifest_id.to_string(),
            config: self.cfg.to_text(),
            dims: *self.model.dims(),
            params: self.model.params().to_vec(),
            velocity: self.opt.velocity().to_vec(),
            epochs_done: self.epochs_done,
            tau: self.policy.tau(),
            best_val: self.policy.best_val(),
            policy_rng: rng::StreamState::capture(self.policy.rng()),
            gumbel: self.gumbel.as_ref().map(|g| GumbelState {
                k: g.k(),
                beta: g.beta(),
                log_alpha: g.as_flat().to_vec(),
            }),
            records: self.records.clone(),
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &LstmLm {
        &self.model
    }

    pub fn into_model(self) -> LstmLm {
        self.model
    }

    pub fn policy(&self) -> &PolicyState {
        &self.policy
    }

    pub fn neighbor_table(&self) -> Option<&NeighborTable> {
        self.table.as_ref()
    }

    pub fn transition_table(&self) -> Option<&TransitionTable> {
        self.transitions.as_ref()
    }

    pub fn gumbel(&self) -> Option<&GumbelLogits> {
        self.gumbel.as_ref()
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn is_finished(&self) -> bool {
        self.epochs_done >= self.cfg.epochs
    }

    fn source(&self) -> Option<&dyn ReplacementSource> {
        match (&self.transitions, &self.table) {
            (Some(t), _) => Some(t),
            (None, Some(t)) => Some(t),
            _ => None,
        }
    }

    /// One pass over the training batches. With `learn` false nothing but
    /// the policy stream changes. Returns the summed training NLL and the
    /// number of predicted tokens.
    fn pass(
        &mut self,
        epoch: usize,
        lr: f64,
        learn: bool,
        mut trace: Option<&mut Vec<DecisionRow>>,
    ) -> Result<(f64, usize)> {
        let streams = self.cfg.batch_size;
        let mut states = vec![self.model.initial_state(); streams];
        let mut prevs: Vec<Option<usize>> = vec![None; streams];
        let (mut nll, mut count) = (0.0, 0usize);
        let batches = std::mem::take(&mut self.batches);
        let result = (|| {
            for (step, batch) in batches.iter().enumerate() {
                let mask = self.policy.decide_batch_positions(batch.len());
                let ctx = SeqCtx {
                    model: &self.model,
                    source: self.source(),
                    table: self.table.as_ref(),
                    gumbel: self.gumbel.as_ref(),
                    tau: self.policy.tau(),
                    decoding: self.cfg.decoding,
                    learn,
                    record: trace.is_some(),
                    scale: 1.0 / (streams * batch.len()) as f64,
                };
                let seed = self.cfg.seed;
                let outcomes: Vec<Result<SeqOutcome>> = (0..streams)
                    .into_par_iter()
                    .map(|b| {
                        run_sequence(
                            &ctx,
                            &batch.inputs[b],
                            &batch.targets[b],
                            &mask,
                            states[b].clone(),
                            prevs[b],
                            rng::derived(seed, &[epoch as u64, step as u64, b as u64]),
                        )
                    })
                    .collect();
                let mut total = learn.then(|| Gradients::zeros(&self.model));
                let mut touched = BTreeSet::new();
                let mut gumbel_grad = self.gumbel.as_ref().map(|g| vec![0.0; g.as_flat().len()]);
                for (b, o) in outcomes.into_iter().enumerate() {
                    let o = o?;
                    nll += o.nll;
                    count += batch.len();
                    if let (Some(total), Some(g)) = (total.as_mut(), o.grads.as_ref()) {
                        total.add_assign(g);
                    }
                    if let (Some(buf), Some(g)) = (gumbel_grad.as_mut(), self.gumbel.as_ref()) {
                        let k = g.k();
                        for (word, d) in &o.gumbel_grads {
                            touched.insert(*word);
                            for (x, y) in buf[word * k..(word + 1) * k].iter_mut().zip(d) {
                                *x += y;
                            }
                        }
                    }
                    if let Some(rows) = trace.as_deref_mut() {
                        rows.extend(o.decisions.iter().map(|&(t, source, teacher_id, chosen_id)| {
                            DecisionRow {
                                epoch,
                                step,
                                t,
                                source,
                                teacher_id,
                                chosen_id,
                                seq: b,
                            }
                        }));
                    }
                    states[b] = o.state;
                    prevs[b] = o.prev;
                }
                if let Some(total) = total {
                    self.opt.step(&mut self.model, &total, lr)?;
                    if let (Some(g), Some(buf)) = (self.gumbel.as_mut(), gumbel_grad) {
                        if !touched.is_empty() {
                            let rows: Vec<usize> = touched.into_iter().collect();
                            g.update(&buf, &rows)?;
                        }
                    }
                }
            }
            Ok((nll, count))
        })();
        self.batches = batches;
        result
    }

    /// Trains one epoch, validates, and applies the temperature or Gumbel
    /// bookkeeping. On divergence the record is kept and an error returned.
    pub fn run_epoch(
        &mut self,
        data: &TrainData,
        trace: Option<&mut Vec<DecisionRow>>,
    ) -> Result<EpochRecord> {
        if self.is_finished() {
            return Err(Error::invalid("all configured epochs are already done"));
        }
        let start = Instant::now();
        let epoch = self.epochs_done + 1;
        let total = self.cfg.epochs;
        let (epsilon, gamma) = rates_for_epoch(&self.ss, &self.nnrs, epoch, total);
        self.policy.set_rates(epsilon, gamma)?;
        let lr = cosine_lr(self.cfg.base_lr, epoch - 1, total);
        let (nll, count) = self.pass(epoch, lr, true, trace)?;
        let train_loss = nll / count as f64;
        let val_ppl = validate(&self.model, &data.valid, self.cfg.bptt)?;
        let limit = 10.0 * data.vocab.len() as f64;
        let diverged = !val_ppl.is_finite() || val_ppl > limit;
        if !diverged {
            if self.cfg.mode == Mode::Gsns {
                self.policy.record_validation(val_ppl);
            } else {
                let u = self.policy.update_temperature(val_ppl)?;
                if u.after != u.before {
                    if let Some(t) = &self.table {
                        self.table = Some(t.renormalize(u.after)?);
                    }
                }
            }
        }
        let record = EpochRecord {
            epoch,
            epsilon,
            gamma,
            tau: self.policy.tau(),
            train_loss,
            val_ppl,
            best_val_ppl: self.policy.best_val(),
            lr,
            wall_time: start.elapsed().as_secs_f64(),
        };
        self.records.push(record.clone());
        self.epochs_done = epoch;
        if diverged {
            return Err(Error::Diverged {
                epoch,
                ppl: val_ppl,
                limit,
            });
        }
        log::info!(
            "epoch {epoch}/{total} eps={epsilon:.3} gamma={gamma:.3} tau={:.3} train_loss={train_loss:.4} val_ppl={val_ppl:.3}",
            record.tau
        );
        Ok(record)
    }

    /// Runs epochs until the configured count (or `opts.stop_after`).
    /// `on_epoch` sees the trainer after every completed epoch.
    pub fn run(
        &mut self,
        data: &TrainData,
        opts: TrainOptions,
        mut on_epoch: impl FnMut(&Trainer) -> Result<()>,
    ) -> Result<Vec<DecisionRow>> {
        let mut rows = Vec::new();
        while !self.is_finished() && opts.stop_after.is_none_or(|s| self.epochs_done < s) {
            let trace = opts.trace.then_some(&mut rows);
            self.run_epoch(data, trace)?;
            on_epoch(self)?;
        }
        Ok(rows)
    }

    /// Dry run of the policy over one epoch's batches with the current
    /// model: records every decision, updates no parameter.
    pub fn trace_epoch(&mut self, epoch: usize) -> Result<Vec<DecisionRow>> {
        if epoch == 0 || epoch > self.cfg.epochs {
            return Err(Error::invalid(format!(
                "epoch {epoch} outside 1..={}",
                self.cfg.epochs
            )));
        }
        let (epsilon, gamma) = rates_for_epoch(&self.ss, &self.nnrs, epoch, self.cfg.epochs);
        self.policy.set_rates(epsilon, gamma)?;
        let mut rows = Vec::new();
        self.pass(epoch, 0.0, false, Some(&mut rows))?;
        Ok(rows)
    }
}

/// Loads the data named in `cfg` and trains to completion.
pub fn run_training(cfg: &TrainConfig) -> Result<(LstmLm, Vec<EpochRecord>)> {
    let data = TrainData::load(cfg)?;
    let mut t = Trainer::new(cfg, &data)?;
    t.run(&data, TrainOptions::default(), |_| Ok(()))?;
    let records = t.records.clone();
    Ok((t.into_model(), records))
}
