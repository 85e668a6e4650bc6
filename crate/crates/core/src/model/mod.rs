//! LSTM language model, its optimizer and decoding helpers.

mod lstm;
mod optim;

pub use lstm::{Gradients, Layout, LstmLm, LstmState, ModelDims, StepInput, Tape};
pub use optim::{clip_factor, cosine_lr, sgd_update, Sgd, StepStats};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::neighbors::sample_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decoding {
    /// Arg-max; ties go to the smaller id.
    #[default]
    Greedy,
    Sample,
}

impl std::str::FromStr for Decoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" | "argmax" => Ok(Decoding::Greedy),
            "sample" => Ok(Decoding::Sample),
            other => Err(Error::invalid(format!("unknown decoding {other:?} (greedy, sample)"))),
        }
    }
}

impl std::fmt::Display for Decoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decoding::Greedy => "greedy",
            Decoding::Sample => "sample",
        })
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Picks the next token from a probability (or log-probability, for
/// greedy) vector.
pub fn predict(dist: &[f64], decoding: Decoding, rng: &mut dyn RngCore) -> usize {
    match decoding {
        Decoding::Greedy => argmax(dist),
        Decoding::Sample => sample_index(dist, rng),
    }
}

/// Mean negative log-likelihood of `targets` under the distributions `dists`.
/// Probabilities are floored at `1e-300` so a zero never yields infinity.
pub fn loss(dists: &[Vec<f64>], targets: &[usize]) -> Result<f64> {
    if dists.len() != targets.len() || dists.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: dists.len(),
            found: targets.len(),
        });
    }
    let mut total = 0.0;
    for (d, &y) in dists.iter().zip(targets) {
        let p = *d.get(y).ok_or(Error::IdOutOfRange { id: y, size: d.len() })?;
        total -= p.max(1e-300).ln();
    }
    Ok(total / targets.len() as f64)
}

pub fn perplexity(mean_nll: f64) -> f64 {
    mean_nll.exp()
}
