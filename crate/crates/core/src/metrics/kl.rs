//! KL decomposition of mixed teacher / sampled / replaced training on toy
//! first-order Markov chains.
//!
//! With stationary marginal `pi`, conditional rows `T[h]`, rates `eps` and
//! `gamma`, the terms are
//!
//! ```text
//! marginal      KL[pi_P || pi_Q]
//! ss_model      (1 - eps)   * E_{h~pi_Q} KL[A_h || Q[h]]
//! ss_data       eps         * E_{h~pi_P} KL[P[h] || Q[h]]
//! nn_model      (1 - gamma) * E_{h~pi_Q} KL[A_h || Q[h]]
//! nn_data       gamma       * E_{h~pi_P} KL[P[h] || Q[h]]
//! ```
//!
//! where `A_h` is `P[h]` under [`KlForm::Conditional`] and the marginal
//! `pi_P` under [`KlForm::AsPrinted`]. Only the conditional form vanishes
//! for `P = Q` on chains that are not i.i.d.

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyChain {
    transition: Vec<Vec<f64>>,
    marginal: Vec<f64>,
}

impl ToyChain {
    /// Chain with its stationary marginal computed by power iteration.
    pub fn new(transition: Vec<Vec<f64>>) -> Result<Self> {
        Self::check(&transition)?;
        let n = transition.len();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..100_000 {
            let next = step(&pi, &transition);
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-16 {
                break;
            }
        }
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= s);
        Ok(Self {
            transition,
            marginal: pi,
        })
    }

    /// Chain with an explicit marginal, which must be stationary.
    pub fn with_marginal(transition: Vec<Vec<f64>>, marginal: Vec<f64>) -> Result<Self> {
        Self::check(&transition)?;
        if marginal.len() != transition.len() {
            return Err(Error::ShapeMismatch {
                expected: transition.len(),
                found: marginal.len(),
            });
        }
        check_dist(&marginal, 0)?;
        let next = step(&marginal, &transition);
        if next.iter().zip(&marginal).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::invalid("marginal is not stationary for the transitions"));
        }
        Ok(Self {
            transition,
            marginal,
        })
    }

    /// Whitespace-separated rows of the transition matrix; `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let row = body
                .split_whitespace()
                .map(|x| {
                    x.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("not a number: {x:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    fn check(t: &[Vec<f64>]) -> Result<()> {
        if t.is_empty() {
            return Err(Error::invalid("chain has no states"));
        }
        for (i, row) in t.iter().enumerate() {
            if row.len() != t.len() {
                return Err(Error::ShapeMismatch {
                    expected: t.len(),
                    found: row.len(),
                });
            }
            check_dist(row, i)?;
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }
}

fn check_dist(p: &[f64], row: usize) -> Result<()> {
    if p.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(Error::invalid(format!(
            "row {row} has a non-positive entry; smooth the chain first"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::RowSum { row, sum });
    }
    Ok(())
}

fn step(pi: &[f64], t: &[Vec<f64>]) -> Vec<f64> {
    let n = pi.len();
    let mut out = vec![0.0; n];
    for (h, row) in t.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            out[j] += pi[h] * p;
        }
    }
    out
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlForm {
    /// Sampled-history terms compare conditionals; zero iff `P = Q`.
    #[default]
    Conditional,
    /// Sampled-history terms compare the marginal of `P` to `Q`'s
    /// conditionals, exactly as the decomposition is usually printed.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlTerms {
    pub marginal: f64,
    pub ss_model: f64,
    pub ss_data: f64,
    pub nn_model: f64,
    pub nn_data: f64,
    pub total: f64,
}

impl KlTerms {
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("marginal", self.marginal),
            ("ss_model", self.ss_model),
            ("ss_data", self.ss_data),
            ("nn_model", self.nn_model),
            ("nn_data", self.nn_data),
            ("total", self.total),
        ]
    }
}

pub fn kl_decomposition(
    p: &ToyChain,
    q: &ToyChain,
    epsilon: f64,
    gamma: f64,
    form: KlForm,
) -> Result<KlTerms> {
    if p.states() != q.states() {
        return Err(Error::ShapeMismatch {
            expected: p.states(),
            found: q.states(),
        });
    }
    for (name, r) in [("epsilon", epsilon), ("gamma", gamma)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid(format!("{name} {r} outside [0, 1]")));
        }
    }
    let n = p.states();
    let under_q: f64 = (0..n)
        .map(|h| {
            let a = match form {
                KlForm::Conditional => &p.transition[h],
                KlForm::AsPrinted => &p.marginal,
            };
            q.marginal[h] * kl(a, &q.transition[h])
        })
        .sum();
    let under_p: f64 = (0..n)
        .map(|h| p.marginal[h] * kl(&p.transition[h], &q.transition[h]))
        .sum();
    let marginal = kl(&p.marginal, &q.marginal);
    let ss_model = (1.0 - epsilon) * under_q;
    let ss_data = epsilon * under_p;
    let nn_model = (1.0 - gamma) * under_q;
    let nn_data = gamma * under_p;
    Ok(KlTerms {
        marginal,
        ss_model,
        ss_data,
        nn_model,
        nn_data,
        total: marginal + ss_model + ss_data + nn_model + nn_data,
    })
}
