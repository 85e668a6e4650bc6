//! Stacked LSTM language model with full backpropagation through time.
//!
//! All parameters live in one flat `Vec<f64>`; [`Layout`] records where each
//! block starts. Gate rows are ordered input, forget, cell, output, each of
//! `hidden` rows.
//!
//! ```text
//! z = b + Wx x + Wh h_prev
//! i = sig(z_i)  f = sig(z_f)  g = tanh(z_g)  o = sig(z_o)
//! c = f * c_prev + i * g      h = o * tanh(c)
//! p = softmax(P h_top + b_p)
//! ```

use rand::Rng;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl ModelDims {
    pub fn new(vocab: usize, embed: usize, hidden: usize, layers: usize) -> Result<Self> {
        if vocab < 2 || embed == 0 || hidden == 0 || layers == 0 {
            return Err(Error::invalid(format!(
                "bad model dims: vocab={vocab} embed={embed} hidden={hidden} layers={layers}"
            )));
        }
        Ok(Self {
            vocab,
            embed,
            hidden,
            layers,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerOffsets {
    input: usize,
    wx: usize,
    wh: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    dims: ModelDims,
    layers: Vec<LayerOffsets>,
    proj_w: usize,
    proj_b: usize,
    total: usize,
}

impl Layout {
    fn new(dims: ModelDims) -> Self {
        let h = dims.hidden;
        let mut at = dims.vocab * dims.embed;
        let mut layers = Vec::with_capacity(dims.layers);
        for l in 0..dims.layers {
            let input = if l == 0 { dims.embed } else { h };
            let wx = at;
            let wh = wx + 4 * h * input;
            let b = wh + 4 * h * h;
            at = b + 4 * h;
            layers.push(LayerOffsets { input, wx, wh, b });
        }
        let proj_w = at;
        let proj_b = proj_w + dims.vocab * h;
        let total = proj_b + dims.vocab;
        Self {
            dims,
            layers,
            proj_w,
            proj_b,
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Range of the input embedding block.
    pub fn embed_range(&self) -> std::ops::Range<usize> {
        0..self.dims.vocab * self.dims.embed
    }

    /// Range of the forget-gate biases of layer `l`.
    pub fn forget_bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let b = self.layers[l].b + self.dims.hidden;
        b..b + self.dims.hidden
    }
}

/// Recurrent state: one `h` and `c` vector per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(dims: &ModelDims) -> Self {
        Self {
            h: vec![vec![0.0; dims.hidden]; dims.layers],
            c: vec![vec![0.0; dims.hidden]; dims.layers],
        }
    }
}

/// Input for one step: a token id (embedding lookup) or a raw vector.
#[derive(Debug, Clone, PartialEq)]
pub enum StepInput {
    Id(usize),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone)]
struct LayerRecord {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone)]
struct StepRecord {
    input: StepInput,
    x: Vec<f64>,
    layers: Vec<LayerRecord>,
    log_probs: Vec<f64>,
}

/// Forward cache for one sequence.
#[derive(Debug, Clone)]
pub struct Tape {
    steps: Vec<StepRecord>,
    state: LstmState,
}

impl Tape {
    pub fn new(init: LstmState) -> Self {
        Self {
            steps: Vec::new(),
            state: init,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Current (last) recurrent state.
    pub fn state(&self) -> &LstmState {
        &self.state
    }

    pub fn log_probs(&self, t: usize) -> &[f64] {
        &self.steps[t].log_probs
    }

    pub fn probs(&self, t: usize) -> Vec<f64> {
        self.steps[t].log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn distributions(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|t| self.probs(t)).collect()
    }

    /// Mean negative log-likelihood of `targets`.
    pub fn nll(&self, targets: &[usize]) -> Result<f64> {
        if targets.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                found: targets.len(),
            });
        }
        Ok(self.sum_nll(targets)? / self.len() as f64)
    }

    /// Summed negative log-likelihood of `targets`.
    pub fn sum_nll(&self, targets: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (s, &y) in self.steps.iter().zip(targets) {
            let lp = s.log_probs.get(y).ok_or(Error::IdOutOfRange {
                id: y,
                size: s.log_probs.len(),
            })?;
            total -= lp;
        }
        Ok(total)
    }
}

/// Parameter-shaped gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros(model: &LstmLm) -> Self {
        Self {
            data: vec![0.0; model.layout.total],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLm {
    dims: ModelDims,
    layout: Layout,
    params: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter_mut().for_each(|l| *l -= lse);
}

impl LstmLm {
    /// Uniform `[-1/sqrt(H), 1/sqrt(H)]` weights, zero biases except a
    /// forget-gate bias of 1.
    pub fn new(dims: ModelDims, seed: u64) -> Self {
        let layout = Layout::new(dims);
        let bound = 1.0 / (dims.hidden as f64).sqrt();
        let mut r = rng::derived(seed, &[0x1517]);
        let mut params: Vec<f64> = (0..layout.total)
            .map(|_| r.gen_range(-bound..=bound))
            .collect();
        for l in &layout.layers {
            params[l.b..l.b + 4 * dims.hidden].fill(0.0);
        }
        for l in 0..dims.layers {
            params[layout.forget_bias_range(l)].fill(1.0);
        }
        params[layout.proj_b..layout.proj_b + dims.vocab].fill(0.0);
        Self {
            dims,
            layout,
            params,
        }
    }

    /// All parameters zero: every output distribution is uniform.
    pub fn zeros(dims: ModelDims) -> Self {
        let layout = Layout::new(dims);
        let params = vec![0.0; layout.total];
        Self {
            dims,
            layout,
            params,
        }
    }

    pub fn from_params(dims: ModelDims, params: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(dims);
        if params.len() != layout.total {
            return Err(Error::ShapeMismatch {
                expected: layout.total,
                found: params.len(),
            });
        }
        Ok(Self {
            dims,
            layout,
            params,
        })
    }

    /// Copies pretrained vectors into the input embedding block.
    pub fn set_embeddings(&mut self, emb: &EmbeddingMatrix) -> Result<()> {
        if emb.rows() != self.dims.vocab || emb.dim() != self.dims.embed {
            return Err(Error::ShapeMismatch {
                expected: self.dims.vocab * self.dims.embed,
                found: emb.rows() * emb.dim(),
            });
        }
        self.params[self.layout.embed_range()].copy_from_slice(emb.as_flat());
        Ok(())
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn embedding(&self, id: usize) -> &[f64] {
        let d = self.dims.embed;
        &self.params[id * d..(id + 1) * d]
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(&self.dims)
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id >= self.dims.vocab {
            return Err(Error::IdOutOfRange {
                id,
                size: self.dims.vocab,
            });
        }
        Ok(())
    }

    /// Runs one step, appends it to `tape` and returns its log-probabilities.
    pub fn step<'t>(&self, tape: &'t mut Tape, input: StepInput) -> Result<&'t [f64]> {
        let x = match &input {
            StepInput::Id(id) => {
                self.check_id(*id)?;
                self.embedding(*id).to_vec()
            }
            StepInput::Vector(v) => {
                if v.len() != self.dims.embed {
                    return Err(Error::ShapeMismatch {
                        expected: self.dims.embed,
                        found: v.len(),
                    });
                }
                v.clone()
            }
        };
        let h = self.dims.hidden;
        let mut layer_in = x.clone();
        let mut records = Vec::with_capacity(self.dims.layers);
        for (l, off) in self.layout.layers.iter().enumerate() {
            let h_prev = tape.state.h[l].clone();
            let c_prev = tape.state.c[l].clone();
            let mut gates = vec![0.0; 4 * h];
            for (r, z) in gates.iter_mut().enumerate() {
                let wx = &self.params[off.wx + r * off.input..off.wx + (r + 1) * off.input];
                let wh = &self.params[off.wh + r * h..off.wh + (r + 1) * h];
                let pre = self.params[off.b + r] + dot(wx, &layer_in) + dot(wh, &h_prev);
                *z = if r / h == 2 { pre.tanh() } else { sigmoid(pre) };
            }
            let mut c = vec![0.0; h];
            let mut tanh_c = vec![0.0; h];
            let mut hv = vec![0.0; h];
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                c[j] = f * c_prev[j] + i * g;
                tanh_c[j] = c[j].tanh();
                hv[j] = o * tanh_c[j];
            }
            tape.state.h[l].copy_from_slice(&hv);
            tape.state.c[l].copy_from_slice(&c);
            layer_in = hv.clone();
            records.push(LayerRecord {
                h_prev,
                c_prev,
                gates,
                tanh_c,
                h: hv,
            });
        }

        let v = self.dims.vocab;
        let mut logits = self.params[self.layout.proj_b..self.layout.proj_b + v].to_vec();
        for (w, l) in logits.iter_mut().enumerate() {
            let row = &self.params[self.layout.proj_w + w * h..self.layout.proj_w + (w + 1) * h];
            *l += dot(row, &layer_in);
        }
        log_softmax(&mut logits);
        tape.steps.push(StepRecord {
            input,
            x,
            layers: records,
            log_probs: logits,
        });
        Ok(&tape.steps.last().expect("just pushed").log_probs)
    }

    pub fn forward(&self, inputs: &[StepInput], init: LstmState) -> Result<Tape> {
        if inputs.is_empty() {
            return Err(Error::invalid("forward needs at least one step"));
        }
        let mut tape = Tape::new(init);
        for inp in inputs {
            self.step(&mut tape, inp.clone())?;
        }
        Ok(tape)
    }

    pub fn forward_ids(&self, ids: &[usize], init: LstmState) -> Result<Tape> {
        let inputs: Vec<StepInput> = ids.iter().map(|&i| StepInput::Id(i)).collect();
        self.forward(&inputs, init)
    }

    /// Accumulates into `grads` the gradient of `scale * sum_t -log p(y_t)`
    /// and returns the gradient with respect to each step's input vector.
    /// Gradients do not flow into the tape's initial state.
    pub fn backward(
        &self,
        tape: &Tape,
        targets: &[usize],
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<Vec<Vec<f64>>> {
        if targets.len() != tape.len() {
            return Err(Error::ShapeMismatch {
                expected: tape.len(),
                found: targets.len(),
            });
        }
        for &y in targets {
            self.check_id(y)?;
        }
        let (h, v, d) = (self.dims.hidden, self.dims.vocab, self.dims.embed);
        let g = &mut grads.data;
        let p = &self.params;
        let mut dh_next = vec![vec![0.0; h]; self.dims.layers];
        let mut dc_next = vec![vec![0.0; h]; self.dims.layers];
        let mut input_grads = vec![vec![0.0; d]; tape.len()];
        let mut dz = vec![0.0; 4 * h];

        for t in (0..tape.len()).rev() {
            let rec = &tape.steps[t];
            let top = &rec.layers[self.dims.layers - 1].h;

            let mut dh = vec![0.0; h];
            for w in 0..v {
                let mut dl = rec.log_probs[w].exp();
                if w == targets[t] {
                    dl -= 1.0;
                }
                dl *= scale;
                g[self.layout.proj_b + w] += dl;
                let row = self.layout.proj_w + w * h;
                axpy(dl, top, &mut g[row..row + h]);
                axpy(dl, &p[row..row + h], &mut dh);
            }

            for l in (0..self.dims.layers).rev() {
                let off = self.layout.layers[l];
                let lr = &rec.layers[l];
                let x_l: &[f64] = if l == 0 { &rec.x } else { &rec.layers[l - 1].h };
                let mut dc = vec![0.0; h];
                for j in 0..h {
                    let dhj = dh[j] + dh_next[l][j];
                    let (i, f, gg, o) = (
                        lr.gates[j],
                        lr.gates[h + j],
                        lr.gates[2 * h + j],
                        lr.gates[3 * h + j],
                    );
                    let tc = lr.tanh_c[j];
                    dc[j] = dc_next[l][j] + dhj * o * (1.0 - tc * tc);
                    dz[j] = dc[j] * gg * i * (1.0 - i);
                    dz[h + j] = dc[j] * lr.c_prev[j] * f * (1.0 - f);
                    dz[2 * h + j] = dc[j] * i * (1.0 - gg * gg);
                    dz[3 * h + j] = dhj * tc * o * (1.0 - o);
                }
                let mut dx = vec![0.0; off.input];
                let mut dh_prev = vec![0.0; h];
                for (r, &dzr) in dz.iter().enumerate() {
                    if dzr == 0.0 {
                        continue;
                    }
                    g[off.b + r] += dzr;
                    let wx = off.wx + r * off.input;
                    axpy(dzr, x_l, &mut g[wx..wx + off.input]);
                    axpy(dzr, &p[wx..wx + off.input], &mut dx);
                    let wh = off.wh + r * h;
                    axpy(dzr, &lr.h_prev, &mut g[wh..wh + h]);
                    axpy(dzr, &p[wh..wh + h], &mut dh_prev);
                }
                for j in 0..h {
                    dc_next[l][j] = dc[j] * lr.gates[h + j];
                }
                dh_next[l] = dh_prev;
                dh = dx;
            }

            if let StepInput::Id(id) = rec.input {
                axpy(1.0, &dh, &mut g[id * d..(id + 1) * d]);
            }
            input_grads[t] = dh;
        }
        Ok(input_grads)
    }
}
