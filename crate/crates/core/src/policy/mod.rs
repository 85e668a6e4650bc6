//! Token-source policy: teacher, own prediction, or sampled neighbor.
//!
//! Two independent uniform draws decide each position. The prediction
//! branch fires when `xi_ss < epsilon`, the neighbor branch when
//! `xi_nnrs < gamma`; if both fire a fair coin picks between them and if
//! neither fires the teacher token is kept. The temperature controller
//! adjusts the neighbor softmax once per epoch from validation perplexity.

mod gumbel;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{clamp_tau, ReplacementSource};
use crate::rng::{self, Stream};

pub use gumbel::{straight_through_grad, GumbelLogits, GumbelSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Teacher forcing only.
    Mle,
    /// Scheduled sampling of the model's own predictions.
    Ss,
    /// Replacement by embedding neighbors.
    Nnrs,
    /// Replacement by bigram successors.
    Tprs,
    /// Scheduled sampling and neighbor replacement together.
    SsNnrs,
    /// Neighbor replacement with Gumbel-softmax learned neighbor logits.
    Gsns,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Mle,
        Mode::Ss,
        Mode::Nnrs,
        Mode::Tprs,
        Mode::SsNnrs,
        Mode::Gsns,
    ];

    pub fn uses_prediction(self) -> bool {
        matches!(self, Mode::Ss | Mode::SsNnrs | Mode::Gsns)
    }

    pub fn uses_neighbors(self) -> bool {
        matches!(self, Mode::Nnrs | Mode::Tprs | Mode::SsNnrs | Mode::Gsns)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mle => "mle",
            Mode::Ss => "ss",
            Mode::Nnrs => "nnrs",
            Mode::Tprs => "tprs",
            Mode::SsNnrs => "ss_nnrs",
            Mode::Gsns => "gsns",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mle" => Ok(Mode::Mle),
            "ss" => Ok(Mode::Ss),
            "nnrs" => Ok(Mode::Nnrs),
            "tprs" => Ok(Mode::Tprs),
            "ss_nnrs" => Ok(Mode::SsNnrs),
            "gsns" => Ok(Mode::Gsns),
            other => Err(Error::invalid(format!(
                "unknown mode {other:?} (mle, ss, nnrs, tprs, ss_nnrs, gsns)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenSource {
    Teacher,
    Prediction,
    Neighbor,
}

impl fmt::Display for TokenSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenSource::Teacher => "teacher",
            TokenSource::Prediction => "prediction",
            TokenSource::Neighbor => "neighbor",
        })
    }
}

impl FromStr for TokenSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher" => Ok(TokenSource::Teacher),
            "prediction" => Ok(TokenSource::Prediction),
            "neighbor" => Ok(TokenSource::Neighbor),
            other => Err(Error::invalid(format!("unknown token source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenDecision {
    pub source: TokenSource,
    pub chosen_id: usize,
}

/// Next temperature under the validation-driven rule, clamped to
/// `[TAU_MIN, TAU_MAX]`. With `step = |tau - (2^tau - 1)|`, no improvement
/// raises tau by `step` and an improvement lowers it by `step`. `tau = 1` is
/// a fixed point.
pub fn temperature_step(tau: f64, improved: bool) -> f64 {
    let step = (tau - (tau.exp2() - 1.0)).abs();
    clamp_tau(if improved { tau - step } else { tau + step })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauUpdate {
    pub before: f64,
    pub after: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct PolicyState {
    mode: Mode,
    epsilon: f64,
    gamma: f64,
    tau: f64,
    best_val: f64,
    rng: Stream,
}

impl PolicyState {
    /// `tau_init` is clamped into the admissible range; `initial_best` is the
    /// starting value of the best validation loss.
    pub fn new(mode: Mode, tau_init: f64, initial_best: f64, seed: u64) -> Self {
        Self {
            mode,
            epsilon: 0.0,
            gamma: 0.0,
            tau: clamp_tau(tau_init),
            best_val: initial_best,
            rng: rng::derived(seed, &[0x9011c7]),
        }
    }

    pub(crate) fn restore(
        mode: Mode,
        tau: f64,
        best_val: f64,
        rng: Stream,
    ) -> Self {
        Self {
            mode,
            epsilon: 0.0,
            gamma: 0.0,
            tau: clamp_tau(tau),
            best_val,
            rng,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn best_val(&self) -> f64 {
        self.best_val
    }

    pub fn rng(&self) -> &Stream {
        &self.rng
    }

    pub fn set_rates(&mut self, epsilon: f64, gamma: f64) -> Result<()> {
        for (name, r) in [("epsilon", epsilon), ("gamma", gamma)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(format!("{name} {r} outside [0, 1]")));
            }
        }
        self.epsilon = epsilon;
        self.gamma = gamma;
        Ok(())
    }

    /// Rates after masking the branches the mode does not use.
    pub fn effective_rates(&self) -> (f64, f64) {
        let eps = if self.mode.uses_prediction() {
            self.epsilon
        } else {
            0.0
        };
        let gamma = if self.mode.uses_neighbors() {
            self.gamma
        } else {
            0.0
        };
        (eps, gamma)
    }

    /// Draws which source feeds one position.
    pub fn draw_source(&mut self) -> TokenSource {
        let (eps, gamma) = self.effective_rates();
        let xi_ss: f64 = self.rng.gen();
        let xi_nnrs: f64 = self.rng.gen();
        match (xi_ss < eps, xi_nnrs < gamma) {
            (true, true) => {
                if self.rng.gen::<bool>() {
                    TokenSource::Prediction
                } else {
                    TokenSource::Neighbor
                }
            }
            (true, false) => TokenSource::Prediction,
            (false, true) => TokenSource::Neighbor,
            (false, false) => TokenSource::Teacher,
        }
    }

    pub fn decide_token(
        &mut self,
        teacher: usize,
        prediction: usize,
        table: &dyn ReplacementSource,
    ) -> TokenDecision {
        let source = self.draw_source();
        let chosen_id = match source {
            TokenSource::Teacher => teacher,
            TokenSource::Prediction => prediction,
            TokenSource::Neighbor => table.sample(teacher, &mut self.rng),
        };
        TokenDecision { source, chosen_id }
    }

    /// One source per time step, shared by every sequence of a mini-batch.
    pub fn decide_batch_positions(&mut self, seq_len: usize) -> Vec<TokenSource> {
        (0..seq_len).map(|_| self.draw_source()).collect()
    }

    /// Applies the temperature rule for validation loss `val_loss` and then
    /// folds it into the best loss seen so far.
    pub fn update_temperature(&mut self, val_loss: f64) -> Result<TauUpdate> {
        if !val_loss.is_finite() || val_loss <= 0.0 {
            return Err(Error::NonFinite(format!(
                "validation loss {val_loss} must be finite and positive"
            )));
        }
        let improved = val_loss - self.best_val < 0.0;
        let before = self.tau;
        self.tau = temperature_step(before, improved);
        self.record_validation(val_loss);
        Ok(TauUpdate {
            before,
            after: self.tau,
            improved,
        })
    }

    /// Updates the best validation loss without touching tau.
    pub fn record_validation(&mut self, val_loss: f64) {
        if val_loss < self.best_val {
            self.best_val = val_loss;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::{NeighborTable, TAU_MAX, TAU_MIN};
    use crate::embedding::EmbeddingMatrix;
    use proptest::prelude::*;

    fn small_table() -> NeighborTable {
        let e = EmbeddingMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.9, 0.1],
            vec![0.0, 1.0],
            vec![0.2, 0.8],
        ])
        .unwrap();
        NeighborTable::build(&e, 2).unwrap()
    }

    fn freqs(eps: f64, gamma: f64, n: usize, seed: u64) -> [f64; 3] {
        let table = small_table();
        let mut p = PolicyState::new(Mode::SsNnrs, 0.1, 100.0, seed);
        p.set_rates(eps, gamma).unwrap();
        let mut c = [0usize; 3];
        for _ in 0..n {
            let d = p.decide_token(0, 3, &table);
            match d.source {
                TokenSource::Teacher => {
                    assert_eq!(d.chosen_id, 0);
                    c[0] += 1
                }
                TokenSource::Prediction => {
                    assert_eq!(d.chosen_id, 3);
                    c[1] += 1
                }
                TokenSource::Neighbor => {
                    assert!(table.neighbors(0).contains(&d.chosen_id));
                    c[2] += 1
                }
            }
        }
        c.map(|x| x as f64 / n as f64)
    }

    #[test]
    fn zero_rates_always_teacher() {
        assert_eq!(freqs(0.0, 0.0, 1000, 1), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn pure_neighbor() {
        assert_eq!(freqs(0.0, 1.0, 1000, 2), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn mixed_rates_match_expectation() {
        let f = freqs(0.5, 0.2, 100_000, 3);
        assert!((f[0] - 0.40).abs() < 0.01, "{f:?}");
        assert!((f[1] - 0.45).abs() < 0.01, "{f:?}");
        assert!((f[2] - 0.15).abs() < 0.01, "{f:?}");
    }

    #[test]
    fn mode_masks_branches() {
        let table = small_table();
        let mut p = PolicyState::new(Mode::Mle, 0.1, 100.0, 0);
        p.set_rates(1.0, 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(p.decide_token(0, 3, &table).source, TokenSource::Teacher);
        }
        let mut p = PolicyState::new(Mode::Nnrs, 0.1, 100.0, 0);
        p.set_rates(1.0, 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(p.decide_token(0, 3, &table).source, TokenSource::Neighbor);
        }
        let mut p = PolicyState::new(Mode::Ss, 0.1, 100.0, 0);
        p.set_rates(1.0, 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(p.decide_token(0, 3, &table).source, TokenSource::Prediction);
        }
    }

    #[test]
    fn batch_masks() {
        let mut p = PolicyState::new(Mode::SsNnrs, 0.1, 10.0, 4);
        assert_eq!(p.decide_batch_positions(3), vec![TokenSource::Teacher; 3]);
        p.set_rates(1.0, 0.0).unwrap();
        assert_eq!(p.decide_batch_positions(5), vec![TokenSource::Prediction; 5]);
        p.set_rates(0.5, 0.5).unwrap();
        let mut a = PolicyState::new(Mode::SsNnrs, 0.1, 10.0, 9);
        let mut b = PolicyState::new(Mode::SsNnrs, 0.1, 10.0, 9);
        a.set_rates(0.5, 0.5).unwrap();
        b.set_rates(0.5, 0.5).unwrap();
        assert_eq!(a.decide_batch_positions(50), b.decide_batch_positions(50));
    }

    #[test]
    fn temperature_examples() {
        assert_eq!(temperature_step(1.0, true), 1.0);
        assert_eq!(temperature_step(1.0, false), 1.0);
        assert_eq!(temperature_step(2.0, false), 3.0);
        // 0.5 - |0.5 - (sqrt 2 - 1)| = sqrt 2 - 1 < 0.5, clamped
        assert_eq!(temperature_step(0.5, true), TAU_MIN);
        assert!((temperature_step(0.5, false) - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(temperature_step(7.0, false), TAU_MAX);
    }

    #[test]
    fn controller_tracks_best_and_initial_clamp() {
        let mut p = PolicyState::new(Mode::Nnrs, 0.1, 50.0, 0);
        assert_eq!(p.tau(), TAU_MIN);
        let u = p.update_temperature(60.0).unwrap();
        assert!(!u.improved && u.after > u.before);
        assert_eq!(p.best_val(), 50.0);
        let u = p.update_temperature(40.0).unwrap();
        assert!(u.improved && u.after <= u.before);
        assert_eq!(p.best_val(), 40.0);
        assert!(p.update_temperature(f64::NAN).is_err());
        assert!(p.update_temperature(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn controller_stays_in_bounds(losses in prop::collection::vec(0.5f64..500.0, 1..40), tau0 in 0.0f64..12.0) {
            let mut p = PolicyState::new(Mode::Nnrs, tau0, 200.0, 0);
            let mut best = p.best_val();
            for l in losses {
                let u = p.update_temperature(l).unwrap();
                prop_assert!((TAU_MIN..=TAU_MAX).contains(&p.tau()));
                if l - best >= 0.0 {
                    prop_assert!(u.after >= u.before);
                } else {
                    prop_assert!(u.after <= u.before);
                }
                prop_assert!(p.best_val() <= best);
                best = p.best_val();
            }
        }
    }
}
