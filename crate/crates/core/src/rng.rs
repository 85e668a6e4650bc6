//! Seeded random streams.
//!
//! Every stochastic component owns a ChaCha8 stream derived from the run
//! seed plus a short tag, so draws never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream keyed by `seed` and up to three extra words.
pub fn derived(seed: u64, parts: &[u64]) -> Stream {
    assert!(parts.len() <= 3, "at most three derivation words");
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    for (i, p) in parts.iter().enumerate() {
        key[8 * (i + 1)..8 * (i + 2)].copy_from_slice(&p.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

pub fn from_seed(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Position of a stream, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamState {
    pub key: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl StreamState {
    pub fn capture(r: &Stream) -> Self {
        Self {
            key: r.get_seed(),
            stream: r.get_stream(),
            word_pos: r.get_word_pos(),
        }
    }

    pub fn restore(&self) -> Stream {
        let mut r = ChaCha8Rng::from_seed(self.key);
        r.set_stream(self.stream);
        r.set_word_pos(self.word_pos);
        r
    }
}
