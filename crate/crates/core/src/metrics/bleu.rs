//! Sentence BLEU-4 and within-batch self-BLEU.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Floor applied to each clipped n-gram count.
pub const BLEU_FLOOR: f64 = 1e-9;

fn ngram_counts<T: Eq + Hash>(s: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    for g in s.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

/// Geometric mean of clipped n-gram precisions times the brevity penalty.
///
/// Orders run up to `min(4, |candidate|)` so a candidate shorter than four
/// tokens is not zeroed by orders it cannot contain. Each clipped count is
/// floored at [`BLEU_FLOOR`]. The brevity penalty uses the reference length
/// closest to the candidate (the shorter on ties).
pub fn bleu4<T: Eq + Hash, R: AsRef<[T]>>(candidate: &[T], references: &[R]) -> Result<f64> {
    if candidate.is_empty() {
        return Err(Error::invalid("bleu candidate is empty"));
    }
    if references.is_empty() {
        return Err(Error::invalid("bleu needs at least one reference"));
    }
    let max_n = candidate.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&[T], usize> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r.as_ref(), n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let clipped: usize = cand
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let total = candidate.len() + 1 - n;
        log_sum += ((clipped as f64).max(BLEU_FLOOR) / total as f64).ln();
    }
    let c = candidate.len();
    let r = references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&r| (r.abs_diff(c), r))
        .expect("non-empty");
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    Ok(bp * (log_sum / max_n as f64).exp())
}

/// Mean BLEU-4 of each sequence against the rest of its batch. `None` (with
/// a warning) for batches of fewer than two sequences.
pub fn self_bleu4<T: Eq + Hash, S: AsRef<[T]>>(batch: &[S]) -> Result<Option<f64>> {
    if batch.len() < 2 {
        log::warn!("self-BLEU skipped for a batch of {}", batch.len());
        return Ok(None);
    }
    let mut total = 0.0;
    for i in 0..batch.len() {
        let others: Vec<&[T]> = batch
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| s.as_ref())
            .collect();
        total += bleu4(batch[i].as_ref(), &others)?;
    }
    Ok(Some(total / batch.len() as f64))
}

/// Self-BLEU averaged over mini-batches; skipped batches do not count.
pub fn mean_self_bleu4<T: Eq + Hash, S: AsRef<[T]>>(batches: &[Vec<S>]) -> Result<Option<f64>> {
    let mut vals = Vec::new();
    for b in batches {
        if let Some(v) = self_bleu4(b)? {
            vals.push(v);
        }
    }
    Ok((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn examples() {
        let a = toks("the cat sat on the mat");
        assert_eq!(bleu4(&a, std::slice::from_ref(&a)).unwrap(), 1.0);
        let b = toks("dogs run far away fast");
        assert!(bleu4(&a, &[b]).unwrap() < 1e-6);
        // three orders, all precisions 1, brevity penalty exp(1 - 4/3)
        let v = bleu4(&toks("the cat sat"), &[toks("the cat sat down")]).unwrap();
        assert!((v - (-1.0f64 / 3.0).exp()).abs() < 1e-12);
        assert!(bleu4::<&str, Vec<&str>>(&[], std::slice::from_ref(&a)).is_err());
        assert!(bleu4::<&str, Vec<&str>>(&a, &[]).is_err());
    }

    #[test]
    fn hand_counted_partial_match() {
        // candidate 6 tokens vs reference 6 tokens
        let c = toks("the cat the cat on mat");
        let r = toks("the cat sat on the mat");
        // unigrams: the 2/2, cat 1/2 clipped to 1, on 1, mat 1 -> 5/6
        // bigrams: the-cat 1 (ref 1), cat-the 0, the-cat dup clipped, cat-on 0, on-mat 0 -> 1/5
        // trigrams and 4-grams: 0 -> floored
        let p = [5.0 / 6.0, 1.0 / 5.0, BLEU_FLOOR / 4.0, BLEU_FLOOR / 3.0];
        let want = (p.iter().map(|x: &f64| x.ln()).sum::<f64>() / 4.0).exp();
        assert!((bleu4(&c, &[r]).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn self_bleu_examples() {
        let s = toks("a b c d e");
        assert_eq!(self_bleu4(&[s.clone(), s.clone(), s.clone()]).unwrap(), Some(1.0));
        let batch = [toks("a b c d"), toks("e f g h"), toks("i j k l")];
        assert!(self_bleu4(&batch).unwrap().unwrap() < 1e-6);
        assert_eq!(self_bleu4(&[s]).unwrap(), None);
        let batch = [toks("a b c d x"), toks("a b c y z"), toks("q b c d x")];
        let brute: f64 = (0..3)
            .map(|i| {
                let refs: Vec<Vec<&str>> = (0..3).filter(|&j| j != i).map(|j| batch[j].clone()).collect();
                bleu4(&batch[i], &refs).unwrap()
            })
            .sum::<f64>()
            / 3.0;
        assert_eq!(self_bleu4(&batch).unwrap().unwrap(), brute);
    }

    proptest! {
        #[test]
        fn identity_and_range(a in prop::collection::vec(0u8..6, 1..12), b in prop::collection::vec(0u8..6, 1..12)) {
            prop_assert_eq!(bleu4(&a, std::slice::from_ref(&a)).unwrap(), 1.0);
            let v = bleu4(&a, std::slice::from_ref(&b)).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn self_bleu_permutation_invariant(batch in prop::collection::vec(prop::collection::vec(0u8..5, 1..8), 2..6), rot in 0usize..6) {
            let mut p = batch.clone();
            p.rotate_left(rot % batch.len());
            p.reverse();
            let x = self_bleu4(&batch).unwrap().unwrap();
            let y = self_bleu4(&p).unwrap().unwrap();
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
