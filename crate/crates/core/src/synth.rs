//! Seeded synthetic corpora for tests and desk-scale experiments.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::embedding::{fallback_row, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rng;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
    /// Pretrained-style vectors keyed by word.
    pub vectors: HashMap<String, Vec<f64>>,
    pub dim: usize,
}

impl SynthCorpus {
    /// Embedding rows aligned to `vocab`; words without a vector get the
    /// usual seeded fallback row.
    pub fn embeddings(&self, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingMatrix> {
        let mut data = Vec::with_capacity(vocab.len() * self.dim);
        for (i, tok) in vocab.tokens().iter().enumerate() {
            match self.vectors.get(tok) {
                Some(v) => data.extend_from_slice(v),
                None => data.extend(fallback_row(seed, i, self.dim)),
            }
        }
        EmbeddingMatrix::from_flat(data, self.dim)
    }

    /// word2vec text with a `count dim` header, rows sorted by word.
    pub fn word2vec_text(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut s = format!("{} {}\n", words.len(), self.dim);
        for w in words {
            s.push_str(w);
            for x in &self.vectors[w] {
                s.push_str(&format!(" {x}"));
            }
            s.push('\n');
        }
        s
    }
}

fn word(i: usize) -> String {
    format!("w{i}")
}

fn unit_vector(r: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Cuts one walk into consecutive train, valid and test pieces.
fn cut(mut walk: Vec<String>, lengths: [usize; 3]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let test = walk.split_off(lengths[0] + lengths[1]);
    let valid = walk.split_off(lengths[0]);
    (walk, valid, test)
}

/// A single random cycle through `words` tokens: every token has exactly one
/// successor, so the generating chain has zero entropy. The splits are
/// consecutive pieces of one walk.
pub fn deterministic_chain(
    words: usize,
    lengths: [usize; 3],
    dim: usize,
    seed: u64,
) -> Result<SynthCorpus> {
    if words < 2 {
        return Err(Error::invalid("need at least two words"));
    }
    let mut r = rng::derived(seed, &[0x5e1f]);
    let mut order: Vec<usize> = (0..words).collect();
    order.shuffle(&mut r);
    let mut next = vec![0; words];
    for i in 0..words {
        next[order[i]] = order[(i + 1) % words];
    }
    let mut cur = r.gen_range(0..words);
    let walk: Vec<String> = (0..lengths.iter().sum::<usize>())
        .map(|_| {
            let w = word(cur);
            cur = next[cur];
            w
        })
        .collect();
    let (train, valid, test) = cut(walk, lengths);
    let vectors = (0..words).map(|i| (word(i), unit_vector(&mut r, dim))).collect();
    Ok(SynthCorpus {
        train,
        valid,
        test,
        vectors,
        dim,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynonymSpec {
    pub clusters: usize,
    pub cluster_size: usize,
    /// Successor clusters per cluster.
    pub fan_out: usize,
    pub dim: usize,
    /// Per-member perturbation added to the shared cluster vector.
    pub noise: f64,
    pub lengths: [usize; 3],
}

impl Default for SynonymSpec {
    fn default() -> Self {
        Self {
            clusters: 8,
            cluster_size: 4,
            fan_out: 2,
            dim: 16,
            noise: 0.05,
            lengths: [6000, 1000, 1000],
        }
    }
}

/// Markov chain over clusters of interchangeable words. Each cluster moves
/// to one of `fan_out` successor clusters, the first being the next cluster
/// in a fixed cycle; the emitted word is uniform over the members. Members
/// share their cluster's vector plus small noise.
pub fn synonym_clusters(spec: SynonymSpec, seed: u64) -> Result<SynthCorpus> {
    if spec.clusters < 2 || spec.cluster_size == 0 || spec.fan_out == 0 || spec.dim == 0 {
        return Err(Error::invalid("synonym spec needs >= 2 clusters and positive sizes"));
    }
    let mut r = rng::derived(seed, &[0x5a0a]);
    // the first successor walks a cycle over all clusters, keeping the chain irreducible
    let succ: Vec<Vec<usize>> = (0..spec.clusters)
        .map(|c| {
            std::iter::once((c + 1) % spec.clusters)
                .chain((1..spec.fan_out).map(|_| r.gen_range(0..spec.clusters)))
                .collect()
        })
        .collect();
    let member = |c: usize, m: usize| word(c * spec.cluster_size + m);
    let mut c = r.gen_range(0..spec.clusters);
    let walk: Vec<String> = (0..spec.lengths.iter().sum::<usize>())
        .map(|_| {
            let w = member(c, r.gen_range(0..spec.cluster_size));
            c = succ[c][r.gen_range(0..spec.fan_out)];
            w
        })
        .collect();
    let (train, valid, test) = cut(walk, spec.lengths);
    let mut vectors = HashMap::new();
    for c in 0..spec.clusters {
        let base = unit_vector(&mut r, spec.dim);
        for m in 0..spec.cluster_size {
            let v = base
                .iter()
                .map(|x| x + spec.noise * r.gen_range(-1.0..1.0))
                .collect();
            vectors.insert(member(c, m), v);
        }
    }
    Ok(SynthCorpus {
        train,
        valid,
        test,
        vectors,
        dim: spec.dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_is_deterministic_and_seeded() {
        let a = deterministic_chain(10, [200, 50, 50], 4, 3).unwrap();
        let b = deterministic_chain(10, [200, 50, 50], 4, 3).unwrap();
        assert_eq!(a, b);
        let mut succ: HashMap<&str, &str> = HashMap::new();
        for w in a.train.windows(2) {
            let prev = succ.insert(&w[0], &w[1]);
            assert!(prev.is_none() || prev == Some(&w[1]));
        }
        assert_eq!(succ.len(), 10);
    }

    #[test]
    fn synonyms_share_direction() {
        let c = synonym_clusters(SynonymSpec::default(), 1).unwrap();
        let vocab = Vocabulary::build(&c.train, 1).unwrap();
        let e = c.embeddings(&vocab, 0).unwrap();
        let (a, b) = (vocab.id("w0"), vocab.id("w1"));
        let cos = crate::neighbors::cosine(e.row(a), e.row(b)).unwrap();
        assert!(cos > 0.9, "{cos}");
    }
}
