#![allow(dead_code)]

use nnrs_core::model::{cosine_lr, Gradients, LstmLm, ModelDims, Sgd, StepInput};
use nnrs_core::rng;
use nnrs_core::synth::{self, SynonymSpec};
use nnrs_core::trainer::{make_batches, validate, TrainConfig, TrainData};
use nnrs_core::Mode;
use rand::Rng;

pub fn chain_data(words: usize, seed: u64) -> TrainData {
    let c = synth::deterministic_chain(words, [2000, 300, 300], 8, seed).unwrap();
    TrainData::from_tokens(&c.train, &c.valid, &c.test, 1, |v| c.embeddings(v, seed)).unwrap()
}

pub fn synonym_data(seed: u64) -> TrainData {
    let spec = SynonymSpec {
        clusters: 6,
        cluster_size: 3,
        dim: 8,
        lengths: [2000, 300, 300],
        ..SynonymSpec::default()
    };
    let c = synth::synonym_clusters(spec, seed).unwrap();
    TrainData::from_tokens(&c.train, &c.valid, &c.test, 1, |v| c.embeddings(v, seed)).unwrap()
}

pub fn small_config(mode: Mode, epochs: usize) -> TrainConfig {
    TrainConfig {
        mode,
        epochs,
        embed_dim: 8,
        hidden: 16,
        layers: 2,
        batch_size: 4,
        bptt: 12,
        k: Some(3),
        base_lr: 5.0,
        clip: 0.5,
        ..TrainConfig::default()
    }
}

/// Small LSTM with spread-out parameters, one raw-vector input and random targets.
pub fn grad_instance(seed: u64) -> (LstmLm, Vec<StepInput>, Vec<usize>) {
    let dims = ModelDims::new(8, 4, 6, 2).unwrap();
    let mut m = LstmLm::new(dims, seed);
    let mut r = rng::derived(seed, &[1]);
    m.params_mut().iter_mut().for_each(|p| *p = r.gen_range(-0.6..0.6));
    let mut inputs: Vec<StepInput> = (0..5).map(|_| StepInput::Id(r.gen_range(0..8))).collect();
    inputs[1] = StepInput::Vector((0..4).map(|_| r.gen_range(-1.0..1.0)).collect());
    let targets = (0..5).map(|_| r.gen_range(0..8)).collect();
    (m, inputs, targets)
}

pub fn summed_nll(m: &LstmLm, inputs: &[StepInput], targets: &[usize]) -> f64 {
    m.forward(inputs, m.initial_state()).unwrap().sum_nll(targets).unwrap()
}

/// Largest relative error between backprop and central differences over
/// every parameter.
pub fn worst_grad_error(seed: u64, h: f64) -> f64 {
    let (mut m, inputs, targets) = grad_instance(seed);
    let tape = m.forward(&inputs, m.initial_state()).unwrap();
    let mut g = Gradients::zeros(&m);
    m.backward(&tape, &targets, 1.0, &mut g).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..m.params().len() {
        let orig = m.params()[k];
        m.params_mut()[k] = orig + h;
        let up = summed_nll(&m, &inputs, &targets);
        m.params_mut()[k] = orig - h;
        let dn = summed_nll(&m, &inputs, &targets);
        m.params_mut()[k] = orig;
        let fd = (up - dn) / (2.0 * h);
        let an = g.as_slice()[k];
        if fd == 0.0 && an == 0.0 {
            continue;
        }
        // absolute floor keeps round-off on tiny gradients from dominating
        worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
    }
    worst
}

/// Teacher forcing with no policy layer at all: `(train_loss, val_ppl)` per epoch.
#[allow(clippy::needless_range_loop)]
pub fn reference_losses(cfg: &TrainConfig, data: &TrainData) -> Vec<(f64, f64)> {
    let dims = ModelDims::new(data.vocab.len(), cfg.embed_dim, cfg.hidden, cfg.layers).unwrap();
    let mut model = LstmLm::new(dims, cfg.seed);
    model.set_embeddings(&data.embeddings).unwrap();
    let mut opt = Sgd::new(cfg.momentum, cfg.clip, cfg.freeze_embeddings).unwrap();
    let batches = make_batches(&data.train, cfg.batch_size, cfg.bptt).unwrap();
    let mut out = Vec::new();
    for epoch in 1..=cfg.epochs {
        let lr = cosine_lr(cfg.base_lr, epoch - 1, cfg.epochs);
        let mut states = vec![model.initial_state(); cfg.batch_size];
        let (mut nll, mut count) = (0.0, 0);
        for b in &batches {
            let scale = 1.0 / (cfg.batch_size * b.len()) as f64;
            let mut total = Gradients::zeros(&model);
            for s in 0..cfg.batch_size {
                let tape = model.forward_ids(&b.inputs[s], states[s].clone()).unwrap();
                nll += tape.sum_nll(&b.targets[s]).unwrap();
                count += b.len();
                let mut g = Gradients::zeros(&model);
                model.backward(&tape, &b.targets[s], scale, &mut g).unwrap();
                total.add_assign(&g);
                states[s] = tape.state().clone();
            }
            opt.step(&mut model, &total, lr).unwrap();
        }
        out.push((nll / count as f64, validate(&model, &data.valid, cfg.bptt).unwrap()));
    }
    out
}
