//! Gumbel-softmax neighbor sampling.
//!
//! Each word keeps learnable logits over its `k` neighbor slots. A draw adds
//! Gumbel noise, takes the argmax as the hard (one-hot) choice, and returns
//! the tempered softmax of the perturbed logits for the straight-through
//! backward pass.

use rand::distributions::Open01;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::neighbors::{softmax_scaled, NeighborTable};

#[derive(Debug, Clone, PartialEq)]
pub struct GumbelLogits {
    k: usize,
    log_alpha: Vec<f64>,
    beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GumbelSample {
    pub slot: usize,
    pub soft_probs: Vec<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("gumbel beta {beta} outside (0, 1]")))
    }
}

impl GumbelLogits {
    pub fn new(rows: usize, k: usize, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            k,
            log_alpha: vec![0.0; rows * k],
            beta,
        })
    }

    /// Logits initialised to the log of the table's current probabilities.
    pub fn from_table(table: &NeighborTable, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let k = table.k();
        let mut log_alpha = Vec::with_capacity(table.vocab_size() * k);
        for w in 0..table.vocab_size() {
            log_alpha.extend(table.probs(w).iter().map(|p| p.max(f64::MIN_POSITIVE).ln()));
        }
        Ok(Self { k, log_alpha, beta })
    }

    pub fn from_parts(k: usize, log_alpha: Vec<f64>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if k == 0 || !log_alpha.len().is_multiple_of(k) {
            return Err(Error::ShapeMismatch {
                expected: k,
                found: log_alpha.len(),
            });
        }
        Ok(Self { k, log_alpha, beta })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> usize {
        self.log_alpha.len() / self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.log_alpha
    }

    pub fn row(&self, word: usize) -> &[f64] {
        &self.log_alpha[word * self.k..(word + 1) * self.k]
    }

    pub fn row_mut(&mut self, word: usize) -> &mut [f64] {
        &mut self.log_alpha[word * self.k..(word + 1) * self.k]
    }

    /// `softmax(log_alpha)` for one row.
    pub fn distribution(&self, word: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        softmax_scaled(self.row(word), 1.0, &mut out);
        out
    }

    /// Hard slot `argmax(log_alpha + G)` with `G = -ln(-ln U)`, plus
    /// `softmax((log_alpha + G) / tau)`.
    pub fn sample(&self, word: usize, tau: f64, rng: &mut dyn RngCore) -> GumbelSample {
        let perturbed: Vec<f64> = self
            .row(word)
            .iter()
            .map(|a| {
                let u: f64 = rng.sample(Open01);
                a - (-u.ln()).ln()
            })
            .collect();
        let slot = perturbed
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if *v > perturbed[best] { i } else { best });
        let mut soft_probs = vec![0.0; self.k];
        softmax_scaled(&perturbed, tau, &mut soft_probs);
        GumbelSample { slot, soft_probs }
    }

    /// `log_alpha <- beta * log_alpha - (1 - beta) * grad` on the listed rows
    /// only. `grad` is the full `rows x k` gradient with respect to the soft
    /// probabilities.
    pub fn update(&mut self, grad: &[f64], rows: &[usize]) -> Result<()> {
        if grad.len() != self.log_alpha.len() {
            return Err(Error::ShapeMismatch {
                expected: self.log_alpha.len(),
                found: grad.len(),
            });
        }
        let n = self.rows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::IdOutOfRange { id: bad, size: n });
        }
        let (beta, k) = (self.beta, self.k);
        for &w in rows {
            let g = &grad[w * k..(w + 1) * k];
            for (a, gi) in self.row_mut(w).iter_mut().zip(g) {
                *a = beta * *a - (1.0 - beta) * gi;
            }
        }
        Ok(())
    }
}

/// Vector-Jacobian product of `soft = softmax((log_alpha + G) / tau)`:
/// maps `dL/dsoft` to `dL/dlog_alpha`.
pub fn straight_through_grad(soft: &[f64], tau: f64, grad_soft: &[f64]) -> Vec<f64> {
    let inner: f64 = soft.iter().zip(grad_soft).map(|(s, g)| s * g).sum();
    soft.iter()
        .zip(grad_soft)
        .map(|(s, g)| s * (g - inner) / tau)
        .collect()
}
