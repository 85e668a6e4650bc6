//! Seeded inputs shared by the benchmarks.

use nnrs_core::model::{LstmLm, ModelDims};
use nnrs_core::rng;
use nnrs_core::EmbeddingMatrix;
use rand::Rng;

pub fn embeddings(rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut r = rng::from_seed(seed);
    let flat = (0..rows * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
    EmbeddingMatrix::from_flat(flat, dim).expect("non-empty matrix")
}

pub fn token_ids(len: usize, vocab: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::from_seed(seed);
    (0..len).map(|_| r.gen_range(0..vocab)).collect()
}

/// Model at the default desk-scale width.
pub fn model(vocab: usize) -> LstmLm {
    LstmLm::new(ModelDims::new(vocab, 64, 128, 2).expect("positive dims"), 1)
}
