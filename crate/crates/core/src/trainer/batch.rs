//! Contiguous language-model batching.

use crate::error::{Error, Result};

/// One window of `batch` parallel streams; `targets[b]` is `inputs[b]`
/// shifted left by one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub inputs: Vec<Vec<usize>>,
    pub targets: Vec<Vec<usize>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn streams(&self) -> usize {
        self.inputs.len()
    }
}

/// Splits `ids` into `batch_size` contiguous streams of `len / batch_size`
/// tokens (the remainder is dropped) and cuts them into windows of at most
/// `bptt` steps. Consecutive windows continue the same streams, so the
/// recurrent state carries over.
pub fn make_batches(ids: &[usize], batch_size: usize, bptt: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 || bptt == 0 {
        return Err(Error::invalid("batch size and bptt length must be positive"));
    }
    if ids.len() < batch_size * bptt || ids.len() / batch_size < 2 {
        return Err(Error::invalid(format!(
            "corpus of {} tokens is shorter than batch_size * bptt = {}",
            ids.len(),
            batch_size * bptt
        )));
    }
    let stream_len = ids.len() / batch_size;
    let streams: Vec<&[usize]> = ids.chunks_exact(stream_len).take(batch_size).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < stream_len {
        let len = bptt.min(stream_len - 1 - i);
        out.push(Batch {
            inputs: streams.iter().map(|s| s[i..i + len].to_vec()).collect(),
            targets: streams.iter().map(|s| s[i + 1..i + 1 + len].to_vec()).collect(),
        });
        i += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_layout() {
        let ids: Vec<usize> = (1..=12).collect();
        let b = make_batches(&ids, 2, 3).unwrap();
        assert_eq!(b[0].inputs, vec![vec![1, 2, 3], vec![7, 8, 9]]);
        assert_eq!(b[0].targets, vec![vec![2, 3, 4], vec![8, 9, 10]]);
        assert_eq!(b[1].inputs, vec![vec![4, 5], vec![10, 11]]);
        assert_eq!(b[1].targets, vec![vec![5, 6], vec![11, 12]]);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn target_accounting() {
        for n in 6..60 {
            let ids: Vec<usize> = (0..n).collect();
            for bs in 1..4 {
                for t in 1..5 {
                    let Ok(b) = make_batches(&ids, bs, t) else {
                        assert!(n < bs * t || n / bs < 2);
                        continue;
                    };
                    let total: usize = b.iter().map(|x| x.len() * x.streams()).sum();
                    assert!(total <= n - bs);
                    assert!(b.iter().all(|x| x.len() <= t && !x.is_empty()));
                }
            }
        }
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(make_batches(&[1, 2, 3], 2, 2).is_err());
    }
}
