//! Plain SGD with optional momentum and global-norm clipping.

use crate::error::{Error, Result};
use crate::model::lstm::{Gradients, LstmLm};

/// Cosine decay from `base` at epoch 0 to zero at `total`.
pub fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    let z = (epoch as f64 / total.max(1) as f64).clamp(0.0, 1.0);
    base * (1.0 + (std::f64::consts::PI * z).cos()) / 2.0
}

/// Factor that brings a gradient of norm `norm` down to at most `clip`.
/// `clip <= 0` disables clipping.
pub fn clip_factor(norm: f64, clip: f64) -> f64 {
    if clip > 0.0 && norm > clip {
        clip / norm
    } else {
        1.0
    }
}

/// Plain clipped step on raw slices: `p -= lr * clip(g)`. Returns the norm
/// of the applied update.
pub fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64, clip: f64) -> Result<f64> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch {
            expected: params.len(),
            found: grads.len(),
        });
    }
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite(format!("gradient norm {norm}")));
    }
    let s = lr * clip_factor(norm, clip);
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= s * g;
    }
    Ok(s * norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub grad_norm: f64,
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub clip: f64,
    pub freeze_embeddings: bool,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(momentum: f64, clip: f64, freeze_embeddings: bool) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum {momentum} outside [0, 1)")));
        }
        Ok(Self {
            momentum,
            clip,
            freeze_embeddings,
            velocity: Vec::new(),
        })
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn set_velocity(&mut self, v: Vec<f64>) {
        self.velocity = v;
    }

    /// `v = mu * v + clip(g)`, `theta -= lr * v`. Refuses non-finite
    /// gradients and leaves the parameters untouched in that case.
    pub fn step(&mut self, model: &mut LstmLm, grads: &Gradients, lr: f64) -> Result<StepStats> {
        let mut g = grads.as_slice().to_vec();
        if self.freeze_embeddings {
            g[model.layout().embed_range()].fill(0.0);
        }
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("gradient norm {norm}")));
        }
        let s = clip_factor(norm, self.clip);
        if self.velocity.len() != g.len() {
            self.velocity = vec![0.0; g.len()];
        }
        let mut upd = 0.0;
        let params = model.params_mut();
        for ((p, v), gi) in params.iter_mut().zip(self.velocity.iter_mut()).zip(&g) {
            *v = self.momentum * *v + s * gi;
            let d = lr * *v;
            *p -= d;
            upd += d * d;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters after update".into()));
        }
        Ok(StepStats {
            grad_norm: norm,
            update_norm: upd.sqrt(),
        })
    }
}
