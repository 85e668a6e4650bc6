//! Top-k cosine neighbor tables and the bigram transition alternative.
//!
//! [`NeighborTable`] stores, for every word, its `k` most similar words by
//! cosine similarity together with a temperature softmax over those
//! similarities. [`TransitionTable`] holds the same shape of data built from
//! corpus bigram counts instead of embeddings. Both implement
//! [`ReplacementSource`], which is all the token-source policy needs.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const TAU_MIN: f64 = 0.5;
pub const TAU_MAX: f64 = 10.0;

const ROW_SUM_TOL: f64 = 1e-9;

pub fn clamp_tau(tau: f64) -> f64 {
    tau.clamp(TAU_MIN, TAU_MAX)
}

#[inline]
fn cos_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = crate::embedding::l2_norm(a);
    let nb = crate::embedding::l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(cos_with_norms(a, b, na, nb))
}

/// `round(log2(|V|))`, at least 1.
pub fn default_k(vocab_size: usize) -> usize {
    ((vocab_size.max(2) as f64).log2().round() as usize).max(1)
}

/// Max-subtracted softmax of `logits / tau`, written into `out`.
pub(crate) fn softmax_scaled(logits: &[f64], tau: f64, out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = ((l - max) / tau).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Inverse-CDF draw from a (normalized) probability vector.
pub fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total: fall back to the last live entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Anything that can propose a replacement for a teacher token.
pub trait ReplacementSource: Sync {
    /// Ids that [`ReplacementSource::sample`] may return for `word`.
    fn candidates(&self, word: usize) -> &[usize];
    fn sample(&self, word: usize, rng: &mut dyn RngCore) -> usize;
}

/// How to scale the neighbor centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CentroidScale {
    /// `(1/k) * sum_i p_i * e_i`, the weighted average with its leading `1/k`.
    #[default]
    OneOverK,
    /// `sum_i p_i * e_i`, the plain expectation under the neighbor distribution.
    Expectation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    k: usize,
    ids: Vec<usize>,
    sims: Vec<f64>,
    probs: Vec<f64>,
    valid: Vec<bool>,
    tau: f64,
}

impl NeighborTable {
    /// Exact brute-force top-k by cosine similarity. The word itself and
    /// flagged (zero) rows are never candidates; equal similarities go to the
    /// smaller id. Probabilities start at the lower temperature bound.
    pub fn build(emb: &EmbeddingMatrix, k: usize) -> Result<Self> {
        let valid_rows = emb.valid_rows();
        if k == 0 || k >= valid_rows {
            return Err(Error::invalid(format!(
                "k must satisfy 1 <= k < {valid_rows} (valid rows), got {k}"
            )));
        }
        let n = emb.rows();
        let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|w| {
                if emb.is_flagged(w) {
                    return (vec![w; k], vec![0.0; k]);
                }
                let (a, na) = (emb.row(w), emb.norm(w));
                let mut cand: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != w && !emb.is_flagged(j))
                    .map(|j| (cos_with_norms(a, emb.row(j), na, emb.norm(j)), j))
                    .collect();
                let order = |x: &(f64, usize), y: &(f64, usize)| {
                    y.0.total_cmp(&x.0).then(x.1.cmp(&y.1))
                };
                cand.select_nth_unstable_by(k - 1, order);
                cand.truncate(k);
                cand.sort_unstable_by(order);
                cand.into_iter().map(|(s, j)| (j, s)).unzip()
            })
            .collect();

        let mut ids = Vec::with_capacity(n * k);
        let mut sims = Vec::with_capacity(n * k);
        for (i, s) in rows {
            ids.extend(i);
            sims.extend(s);
        }
        let valid = (0..n).map(|w| !emb.is_flagged(w)).collect();
        let mut table = Self {
            k,
            ids,
            sims,
            probs: vec![0.0; n * k],
            valid,
            tau: TAU_MIN,
        };
        table.probs = table.probs_at(TAU_MIN);
        Ok(table)
    }

    fn probs_at(&self, tau: f64) -> Vec<f64> {
        let mut probs = vec![0.0; self.sims.len()];
        probs
            .par_chunks_exact_mut(self.k)
            .zip(self.sims.par_chunks_exact(self.k))
            .for_each(|(p, s)| softmax_scaled(s, tau, p));
        probs
    }

    /// New table whose rows are `softmax(sims / tau)`.
    pub fn renormalize(&self, tau: f64) -> Result<Self> {
        if !(TAU_MIN..=TAU_MAX).contains(&tau) {
            return Err(Error::invalid(format!(
                "temperature {tau} outside [{TAU_MIN}, {TAU_MAX}]"
            )));
        }
        Ok(Self {
            probs: self.probs_at(tau),
            tau,
            ..self.clone()
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.valid.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_valid(&self, word: usize) -> bool {
        self.valid[word]
    }

    pub fn neighbors(&self, word: usize) -> &[usize] {
        &self.ids[word * self.k..(word + 1) * self.k]
    }

    pub fn sims(&self, word: usize) -> &[f64] {
        &self.sims[word * self.k..(word + 1) * self.k]
    }

    pub fn probs(&self, word: usize) -> &[f64] {
        &self.probs[word * self.k..(word + 1) * self.k]
    }

    /// Draws a neighbor of `word` from its probability row. A flagged word
    /// is returned unchanged.
    pub fn sample_neighbor(&self, word: usize, rng: &mut dyn RngCore) -> usize {
        if !self.valid[word] {
            return word;
        }
        self.neighbors(word)[sample_index(self.probs(word), rng)]
    }

    /// Probability-weighted combination of the neighbor vectors of `word`,
    /// with rows supplied by `row`. A flagged word yields its own row.
    pub fn centroid_with<'a>(
        &self,
        word: usize,
        row: impl Fn(usize) -> &'a [f64],
        scale: CentroidScale,
    ) -> Vec<f64> {
        if !self.valid[word] {
            return row(word).to_vec();
        }
        let factor = match scale {
            CentroidScale::OneOverK => 1.0 / self.k as f64,
            CentroidScale::Expectation => 1.0,
        };
        let mut out = vec![0.0; row(word).len()];
        for (&id, &p) in self.neighbors(word).iter().zip(self.probs(word)) {
            for (o, x) in out.iter_mut().zip(row(id)) {
                *o += p * x;
            }
        }
        out.iter_mut().for_each(|o| *o *= factor);
        out
    }

    pub fn centroid(&self, emb: &EmbeddingMatrix, word: usize, scale: CentroidScale) -> Vec<f64> {
        self.centroid_with(word, |i| emb.row(i), scale)
    }

    /// CSV rows `word_id,neighbor_id,sim,prob`; flagged words have no rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["word_id", "neighbor_id", "sim", "prob"])?;
        for word in 0..self.vocab_size() {
            if !self.valid[word] {
                continue;
            }
            for i in 0..self.k {
                let at = word * self.k + i;
                out.write_record(&[
                    word.to_string(),
                    self.ids[at].to_string(),
                    self.sims[at].to_string(),
                    self.probs[at].to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV form back. Every present row must have exactly `k`
    /// entries in similarity order and sum to 1 within 1e-9.
    pub fn read_csv<R: Read>(r: R, vocab_size: usize, tau: f64) -> Result<Self> {
        let mut rows: HashMap<usize, Vec<(usize, f64, f64)>> = HashMap::new();
        let mut reader = csv::Reader::from_reader(r);
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |j: usize| -> Result<&str> {
                rec.get(j).ok_or_else(|| Error::Parse {
                    line,
                    msg: "expected 4 columns".into(),
                })
            };
            let parse_err = |msg: String| Error::Parse { line, msg };
            let word: usize = field(0)?.parse().map_err(|e| parse_err(format!("{e}")))?;
            let nb: usize = field(1)?.parse().map_err(|e| parse_err(format!("{e}")))?;
            let sim: f64 = field(2)?.parse().map_err(|e| parse_err(format!("{e}")))?;
            let prob: f64 = field(3)?.parse().map_err(|e| parse_err(format!("{e}")))?;
            if word >= vocab_size || nb >= vocab_size {
                return Err(Error::IdOutOfRange {
                    id: word.max(nb),
                    size: vocab_size,
                });
            }
            rows.entry(word).or_default().push((nb, sim, prob));
        }
        let k = rows
            .values()
            .next()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("neighbor table has no rows"))?;
        let mut ids = Vec::with_capacity(vocab_size * k);
        let mut sims = Vec::with_capacity(vocab_size * k);
        let mut probs = Vec::with_capacity(vocab_size * k);
        let mut valid = vec![false; vocab_size];
        for (w, v) in valid.iter_mut().enumerate() {
            match rows.get(&w) {
                Some(row) => {
                    if row.len() != k {
                        return Err(Error::ShapeMismatch {
                            expected: k,
                            found: row.len(),
                        });
                    }
                    if row.windows(2).any(|p| p[0].1 < p[1].1) {
                        return Err(Error::invalid(format!("row {w} not sorted by similarity")));
                    }
                    let sum: f64 = row.iter().map(|r| r.2).sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::RowSum { row: w, sum });
                    }
                    *v = true;
                    for &(nb, s, p) in row {
                        ids.push(nb);
                        sims.push(s);
                        probs.push(p);
                    }
                }
                None => {
                    ids.extend(std::iter::repeat_n(w, k));
                    sims.extend(std::iter::repeat_n(0.0, k));
                    probs.extend(std::iter::repeat_n(1.0 / k as f64, k));
                }
            }
        }
        Ok(Self {
            k,
            ids,
            sims,
            probs,
            valid,
            tau,
        })
    }
}

impl ReplacementSource for NeighborTable {
    fn candidates(&self, word: usize) -> &[usize] {
        if self.valid[word] {
            self.neighbors(word)
        } else {
            std::slice::from_ref(&self.ids[word * self.k])
        }
    }

    fn sample(&self, word: usize, rng: &mut dyn RngCore) -> usize {
        self.sample_neighbor(word, rng)
    }
}

/// Top-k successors per word from bigram counts, renormalized per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    offsets: Vec<usize>,
    ids: Vec<usize>,
    counts: Vec<u64>,
    probs: Vec<f64>,
}

impl TransitionTable {
    /// Counts `w -> w'` over consecutive pairs of `corpus`, keeps the `k`
    /// largest counts per row (smaller id on ties) and renormalizes. Words
    /// never followed by anything get a self-loop with probability 1.
    pub fn build(corpus: &[usize], vocab_size: usize, k: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if let Some(&bad) = corpus.iter().find(|&&id| id >= vocab_size) {
            return Err(Error::IdOutOfRange {
                id: bad,
                size: vocab_size,
            });
        }
        let mut bigrams: Vec<HashMap<usize, u64>> = vec![HashMap::new(); vocab_size];
        for pair in corpus.windows(2) {
            *bigrams[pair[0]].entry(pair[1]).or_default() += 1;
        }
        let mut offsets = Vec::with_capacity(vocab_size + 1);
        let mut ids = Vec::new();
        let mut counts = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for (w, row) in bigrams.into_iter().enumerate() {
            if row.is_empty() {
                ids.push(w);
                counts.push(0);
                probs.push(1.0);
            } else {
                let mut row: Vec<(usize, u64)> = row.into_iter().collect();
                row.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                row.truncate(k);
                let total: u64 = row.iter().map(|r| r.1).sum();
                for (id, c) in row {
                    ids.push(id);
                    counts.push(c);
                    probs.push(c as f64 / total as f64);
                }
            }
            offsets.push(ids.len());
        }
        Ok(Self {
            offsets,
            ids,
            counts,
            probs,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn successors(&self, word: usize) -> &[usize] {
        &self.ids[self.offsets[word]..self.offsets[word + 1]]
    }

    pub fn counts(&self, word: usize) -> &[u64] {
        &self.counts[self.offsets[word]..self.offsets[word + 1]]
    }

    pub fn probs(&self, word: usize) -> &[f64] {
        &self.probs[self.offsets[word]..self.offsets[word + 1]]
    }

    /// CSV rows `word_id,next_id,count,prob`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["word_id", "next_id", "count", "prob"])?;
        for word in 0..self.vocab_size() {
            for ((id, c), p) in self
                .successors(word)
                .iter()
                .zip(self.counts(word))
                .zip(self.probs(word))
            {
                out.write_record(&[
                    word.to_string(),
                    id.to_string(),
                    c.to_string(),
                    p.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV form; rows must be contiguous and sum to 1 within 1e-9.
    pub fn read_csv<R: Read>(r: R, vocab_size: usize) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let mut per_word: Vec<Vec<(usize, u64, f64)>> = vec![Vec::new(); vocab_size];
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |m: String| Error::Parse { line, msg: m };
            if rec.len() != 4 {
                return Err(bad("expected 4 columns".into()));
            }
            let word: usize = rec[0].parse().map_err(|e| bad(format!("{e}")))?;
            let id: usize = rec[1].parse().map_err(|e| bad(format!("{e}")))?;
            let c: u64 = rec[2].parse().map_err(|e| bad(format!("{e}")))?;
            let p: f64 = rec[3].parse().map_err(|e| bad(format!("{e}")))?;
            if word >= vocab_size || id >= vocab_size {
                return Err(Error::IdOutOfRange {
                    id: word.max(id),
                    size: vocab_size,
                });
            }
            per_word[word].push((id, c, p));
        }
        let mut offsets = vec![0];
        let (mut ids, mut counts, mut probs) = (Vec::new(), Vec::new(), Vec::new());
        for (w, row) in per_word.into_iter().enumerate() {
            if row.is_empty() {
                return Err(Error::invalid(format!("transition row {w} missing")));
            }
            let sum: f64 = row.iter().map(|r| r.2).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSum { row: w, sum });
            }
            for (id, c, p) in row {
                ids.push(id);
                counts.push(c);
                probs.push(p);
            }
            offsets.push(ids.len());
        }
        Ok(Self {
            offsets,
            ids,
            counts,
            probs,
        })
    }
}

impl ReplacementSource for TransitionTable {
    fn candidates(&self, word: usize) -> &[usize] {
        self.successors(word)
    }

    fn sample(&self, word: usize, rng: &mut dyn RngCore) -> usize {
        self.successors(word)[sample_index(self.probs(word), rng)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use proptest::prelude::*;

    fn emb(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn default_k_examples() {
        assert_eq!(default_k(1024), 10);
        assert_eq!(default_k(10_000), 13);
        assert_eq!(default_k(2), 1);
    }

    #[test]
    fn orthonormal_basis_tie_rule() {
        let e = emb(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let t = NeighborTable::build(&e, 1).unwrap();
        assert_eq!(t.neighbors(0), &[1]);
        assert_eq!(t.neighbors(1), &[0]);
        assert_eq!(t.neighbors(2), &[0]);
        for w in 0..3 {
            assert_eq!(t.sims(w), &[0.0]);
        }
    }

    #[test]
    fn duplicate_vector_is_top_neighbor() {
        let e = emb(&[vec![0.3, 0.9], vec![1.0, 0.0], vec![0.3, 0.9]]);
        let t = NeighborTable::build(&e, 1).unwrap();
        assert_eq!(t.neighbors(0), &[2]);
        assert_eq!(t.sims(0), &[1.0]);
    }

    #[test]
    fn k_out_of_range() {
        let e = emb(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(NeighborTable::build(&e, 0).is_err());
        // only two valid rows, so k must be < 2
        assert!(NeighborTable::build(&e, 2).is_err());
        let t = NeighborTable::build(&e, 1).unwrap();
        assert!(!t.is_valid(2));
        assert_eq!(t.neighbors(0), &[1]);
    }

    fn table_with_sims(sims: &[f64]) -> NeighborTable {
        let k = sims.len();
        NeighborTable {
            k,
            ids: (1..=k).collect(),
            sims: sims.to_vec(),
            probs: vec![1.0 / k as f64; k],
            valid: vec![true],
            tau: 1.0,
        }
    }

    #[test]
    fn renormalize_examples() {
        let t = table_with_sims(&[0.9, 0.9, 0.9]).renormalize(3.0).unwrap();
        for p in t.probs(0) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        // softmax(2, 1) = (e/(e+1), 1/(e+1))
        let t = table_with_sims(&[1.0, 0.5]).renormalize(0.5).unwrap();
        assert!((t.probs(0)[0] - 0.731_06).abs() < 1e-5);
        assert!((t.probs(0)[1] - 0.268_94).abs() < 1e-5);
        let t = table_with_sims(&[1.0, 0.0]).renormalize(10.0).unwrap();
        assert!((t.probs(0)[0] - 0.5).abs() < 0.03);
        assert!(table_with_sims(&[1.0]).renormalize(0.4).is_err());
        assert!(table_with_sims(&[1.0]).renormalize(10.5).is_err());
    }

    #[test]
    fn degenerate_distribution_always_first() {
        let mut t = table_with_sims(&[1.0, 0.0, 0.0]);
        t.probs = vec![1.0, 0.0, 0.0];
        let mut r = rng::from_seed(1);
        for _ in 0..1000 {
            assert_eq!(t.sample_neighbor(0, &mut r), 1);
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let t = table_with_sims(&[0.5; 4]).renormalize(1.0).unwrap();
        let mut r = rng::from_seed(2);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for _ in 0..n {
            counts[t.sample_neighbor(0, &mut r)] += 1;
        }
        for c in &counts[1..] {
            assert!((*c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let t = table_with_sims(&[0.9, 0.5, 0.1]).renormalize(0.5).unwrap();
        let draw = |seed| {
            let mut r = rng::from_seed(seed);
            (0..100)
                .map(|_| t.sample_neighbor(0, &mut r))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn flagged_word_is_not_replaced() {
        let e = emb(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]]);
        let t = NeighborTable::build(&e, 1).unwrap();
        let mut r = rng::from_seed(0);
        assert_eq!(t.sample_neighbor(3, &mut r), 3);
        assert_eq!(t.centroid(&e, 3, CentroidScale::OneOverK), vec![0.0, 0.0]);
    }

    #[test]
    fn centroid_examples() {
        let e = emb(&[vec![1.0, 1.0], vec![0.6, 0.8], vec![0.0, 1.0]]);
        let t = NeighborTable::build(&e, 1).unwrap();
        // k = 1: weight 1 and factor 1, so the neighbor vector itself
        let nb = t.neighbors(0)[0];
        assert_eq!(t.centroid(&e, 0, CentroidScale::OneOverK), e.row(nb));

        let e = emb(&[
            vec![1.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, -1.0],
        ]);
        let t = NeighborTable::build(&e, 2).unwrap().renormalize(1.0).unwrap();
        assert_eq!(t.neighbors(0), &[1, 2]);
        let c = t.centroid(&e, 0, CentroidScale::OneOverK);
        assert!((c[0] - 0.25).abs() < 1e-15 && (c[1] - 0.25).abs() < 1e-15);
        let c = t.centroid(&e, 0, CentroidScale::Expectation);
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
    }

    fn ids(s: &str) -> Vec<usize> {
        s.split_whitespace()
            .map(|c| (c.as_bytes()[0] - b'a') as usize)
            .collect()
    }

    #[test]
    fn transition_examples() {
        let t = TransitionTable::build(&ids("a b a b"), 2, 3).unwrap();
        assert_eq!(t.successors(0), &[1]);
        assert_eq!(t.probs(0), &[1.0]);
        assert_eq!(t.successors(1), &[0]);

        let t = TransitionTable::build(&ids("a b a c"), 3, 2).unwrap();
        assert_eq!(t.successors(0), &[1, 2]);
        assert_eq!(t.probs(0), &[0.5, 0.5]);
        // c is only ever the final token
        assert_eq!(t.successors(2), &[2]);
        assert_eq!(t.probs(2), &[1.0]);
    }

    #[test]
    fn transition_truncates_by_count_then_id() {
        let t = TransitionTable::build(&ids("a c a b a d a d"), 4, 2).unwrap();
        // a -> d twice, a -> b once, a -> c once; tie at 1 goes to b
        assert_eq!(t.successors(0), &[3, 1]);
        assert!((t.probs(0)[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(TransitionTable::build(&[], 2, 1).is_err());
    }

    #[test]
    fn csv_round_trips_and_validates() {
        let e = emb(&[
            vec![1.0, 0.2, 0.0],
            vec![0.1, 1.0, 0.3],
            vec![0.5, 0.5, 0.5],
            vec![0.0, 0.0, 0.0],
            vec![-0.3, 0.2, 1.0],
        ]);
        let t = NeighborTable::build(&e, 2).unwrap().renormalize(2.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = NeighborTable::read_csv(buf.as_slice(), 5, 2.0).unwrap();
        assert_eq!(back.ids, t.ids);
        assert_eq!(back.sims, t.sims);
        assert_eq!(back.probs, t.probs);
        assert_eq!(back.valid, t.valid);

        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let mut cols: Vec<String> = lines[1].split(',').map(str::to_owned).collect();
        let p: f64 = cols[3].parse().unwrap();
        cols[3] = (p + 0.1).to_string();
        lines[1] = cols.join(",");
        let broken = lines.join("\n");
        assert!(matches!(
            NeighborTable::read_csv(broken.as_bytes(), 5, 2.0),
            Err(Error::RowSum { row: 0, .. })
        ));

        let tt = TransitionTable::build(&[0, 1, 2, 0, 2, 4], 5, 2).unwrap();
        let mut buf = Vec::new();
        tt.write_csv(&mut buf).unwrap();
        assert_eq!(TransitionTable::read_csv(buf.as_slice(), 5).unwrap(), tt);
    }

    fn random_emb(seed: u64, n: usize, d: usize) -> EmbeddingMatrix {
        let mut r = rng::from_seed(seed);
        let data = (0..n * d).map(|_| r.gen_range(-1.0..1.0)).collect();
        EmbeddingMatrix::from_flat(data, d).unwrap()
    }

    #[test]
    fn matches_brute_force_scan() {
        let e = random_emb(4, 50, 16);
        let t = NeighborTable::build(&e, 6).unwrap();
        for w in 0..50 {
            let a = e.row(w);
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut all: Vec<(f64, usize)> = Vec::new();
            for j in (0..50).filter(|&j| j != w) {
                let b = e.row(j);
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                let mut dot = 0.0;
                for i in 0..16 {
                    dot += a[i] * b[i];
                }
                all.push(((dot / (na * nb)).clamp(-1.0, 1.0), j));
            }
            all.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
            let want: Vec<usize> = all[..6].iter().map(|p| p.1).collect();
            let want_s: Vec<f64> = all[..6].iter().map(|p| p.0).collect();
            assert_eq!(t.neighbors(w), want.as_slice());
            assert_eq!(t.sims(w), want_s.as_slice());
        }
    }

    proptest! {
        #[test]
        fn rows_are_distributions_ordered_by_sim(seed in 0u64..500, n in 4usize..40, d in 2usize..10, tau in TAU_MIN..=TAU_MAX) {
            let e = random_emb(seed, n, d);
            let k = default_k(n).min(n - 2).max(1);
            let t = NeighborTable::build(&e, k).unwrap().renormalize(tau).unwrap();
            for w in 0..n {
                let p = t.probs(w);
                let s = t.sims(w);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(!t.neighbors(w).contains(&w));
                for i in 1..k {
                    prop_assert!(s[i - 1] >= s[i]);
                    prop_assert!(p[i - 1] >= p[i]);
                }
                prop_assert!(s.iter().all(|x| (-1.0..=1.0).contains(x)));
            }
        }

        #[test]
        fn temperature_extremes(seed in 0u64..200) {
            let e = random_emb(seed, 20, 5);
            let t = NeighborTable::build(&e, 4).unwrap();
            let cold = t.renormalize(TAU_MIN).unwrap();
            let hot = t.renormalize(TAU_MAX).unwrap();
            for w in 0..20 {
                let cmax = cold.probs(w).iter().cloned().fold(0.0, f64::max);
                let hmax = hot.probs(w).iter().cloned().fold(0.0, f64::max);
                prop_assert!(cmax >= hmax - 1e-15);
                let hmin = hot.probs(w).iter().cloned().fold(1.0, f64::min);
                let s = hot.sims(w);
                let range = s[0] - s[s.len() - 1];
                prop_assert!(hmax / hmin <= (range / TAU_MAX).exp() * (1.0 + 1e-12));
            }
        }
    }
}
