//! Perplexity, BLEU, word mover's similarity and the KL diagnostic.

mod bleu;
mod kl;
mod wmd;

pub use bleu::{bleu4, mean_self_bleu4, self_bleu4, BLEU_FLOOR};
pub use kl::{kl, kl_decomposition, KlForm, KlTerms, ToyChain};
pub use wmd::{self_wmd, token_similarity, wmd_exact, wmd_score, EXACT_MAX_TOKENS};

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::model::{argmax, LstmLm, StepInput, Tape};
use crate::trainer::validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Bleu,
    Wmd,
    SelfBleu,
    SelfWmd,
    Ppl,
}

impl Metric {
    pub const QUALITY: [Metric; 3] = [Metric::Bleu, Metric::Wmd, Metric::Ppl];
    pub const DIVERSITY: [Metric; 3] = [Metric::SelfBleu, Metric::SelfWmd, Metric::Ppl];

    /// Comma-separated list; `quality` and `diversity` expand to their sets.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let add: Vec<Metric> = match part {
                "quality" => Self::QUALITY.to_vec(),
                "diversity" => Self::DIVERSITY.to_vec(),
                p => vec![p.parse()?],
            };
            for m in add {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("no metrics requested"));
        }
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Bleu => "bleu4",
            Metric::Wmd => "wmd",
            Metric::SelfBleu => "self_bleu4",
            Metric::SelfWmd => "self_wmd",
            Metric::Ppl => "ppl",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bleu" | "bleu4" => Ok(Metric::Bleu),
            "wmd" => Ok(Metric::Wmd),
            "self_bleu" | "self_bleu4" | "self-bleu" => Ok(Metric::SelfBleu),
            "self_wmd" | "self-wmd" => Ok(Metric::SelfWmd),
            "ppl" | "perplexity" => Ok(Metric::Ppl),
            other => Err(Error::invalid(format!(
                "unknown metric {other:?} (bleu, wmd, self_bleu, self_wmd, ppl, quality, diversity)"
            ))),
        }
    }
}

/// One reported number. Values are on the internal `[0, 1]` scale except
/// perplexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metric: String,
    pub split: String,
    pub value: f64,
    pub config: String,
}

pub fn write_reports<W: Write>(reports: &[ScoreReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if reports.is_empty() {
        out.write_record(["metric", "split", "value", "config"])?;
    }
    for r in reports {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_reports<R: Read>(r: R) -> Result<Vec<ScoreReport>> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Teacher-forced tokens before generation starts.
    pub prefix_len: usize,
    /// Greedy tokens generated and compared with the reference.
    pub continuation_len: usize,
    /// Sequences per mini-batch for the self metrics.
    pub batch_size: usize,
    /// BPTT window for perplexity.
    pub bptt: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            prefix_len: 5,
            continuation_len: 10,
            batch_size: 10,
            bptt: 35,
        }
    }
}

/// `(generated, reference)` continuation pairs.
pub type Continuations = Vec<(Vec<usize>, Vec<usize>)>;

/// Cuts `ids` into consecutive segments of `prefix + continuation` tokens,
/// feeds each prefix from a zero state and greedily extends it.
pub fn generate_continuations(
    model: &LstmLm,
    ids: &[usize],
    opts: &EvalOptions,
) -> Result<Continuations> {
    if opts.prefix_len == 0 || opts.continuation_len == 0 {
        return Err(Error::invalid("prefix and continuation lengths must be positive"));
    }
    let seg = opts.prefix_len + opts.continuation_len;
    let mut out = Vec::new();
    for chunk in ids.chunks_exact(seg) {
        let mut tape = Tape::new(model.initial_state());
        let mut next = 0;
        for &id in &chunk[..opts.prefix_len] {
            next = argmax(model.step(&mut tape, StepInput::Id(id))?);
        }
        let mut gen = Vec::with_capacity(opts.continuation_len);
        for _ in 0..opts.continuation_len {
            gen.push(next);
            next = argmax(model.step(&mut tape, StepInput::Id(next))?);
        }
        out.push((gen, chunk[opts.prefix_len..].to_vec()));
    }
    if out.is_empty() {
        return Err(Error::invalid(format!(
            "split of {} tokens is shorter than one segment of {seg}",
            ids.len()
        )));
    }
    Ok(out)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Scores `model` on `ids`. Metrics that cannot be computed (no embedded
/// tokens, batches of one) are left out of the report with a warning.
pub fn evaluate_model(
    model: &LstmLm,
    ids: &[usize],
    emb: &EmbeddingMatrix,
    metrics: &[Metric],
    opts: &EvalOptions,
    split: &str,
    config: &str,
) -> Result<Vec<ScoreReport>> {
    let needs_gen = metrics.iter().any(|m| *m != Metric::Ppl);
    let cont = if needs_gen {
        generate_continuations(model, ids, opts)?
    } else {
        Vec::new()
    };
    let batches: Vec<Vec<&[usize]>> = cont
        .chunks(opts.batch_size.max(1))
        .map(|c| c.iter().map(|(g, _)| g.as_slice()).collect())
        .collect();
    let mut out = Vec::new();
    for &m in metrics {
        let value = match m {
            Metric::Bleu => {
                let v = cont
                    .iter()
                    .map(|(g, r)| bleu4(g, &[r]))
                    .collect::<Result<Vec<f64>>>()?;
                mean(&v)
            }
            Metric::Wmd => {
                let v: Vec<f64> = cont.iter().filter_map(|(g, r)| wmd_score(g, r, emb)).collect();
                mean(&v)
            }
            Metric::SelfBleu => mean_self_bleu4(&batches)?,
            Metric::SelfWmd => {
                let v: Vec<f64> = batches.iter().filter_map(|b| self_wmd(b, emb)).collect();
                mean(&v)
            }
            Metric::Ppl => Some(validate(model, ids, opts.bptt)?),
        };
        match value {
            Some(value) if value.is_finite() => out.push(ScoreReport {
                metric: m.to_string(),
                split: split.to_string(),
                value,
                config: config.to_string(),
            }),
            Some(v) => return Err(Error::NonFinite(format!("{m} = {v}"))),
            None => log::warn!("{m} undefined on split {split}; omitted"),
        }
    }
    Ok(out)
}
