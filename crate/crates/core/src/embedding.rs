//! Dense embedding matrices and the word2vec text-format loader.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::vocab::Vocabulary;

/// Row-major `|V| x d` matrix. Rows whose raw norm is zero are flagged and
/// never take part in neighbor construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f64>,
    dim: usize,
    norms: Vec<f64>,
    flagged: Vec<bool>,
}

impl EmbeddingMatrix {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: dim,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "embedding row {} has a non-finite entry",
                bad / dim
            )));
        }
        let norms: Vec<f64> = data.chunks_exact(dim).map(l2_norm).collect();
        let flagged = norms.iter().map(|&n| n == 0.0).collect();
        Ok(Self {
            data,
            dim,
            norms,
            flagged,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    line: i + 1,
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, dim)
    }

    pub fn rows(&self) -> usize {
        self.norms.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn is_flagged(&self, i: usize) -> bool {
        self.flagged[i]
    }

    pub fn valid_rows(&self) -> usize {
        self.flagged.iter().filter(|f| !**f).count()
    }

    /// Divides each nonzero row by its l2 norm. Zero rows are left untouched
    /// and stay flagged.
    pub fn normalize_rows(&self) -> Self {
        let mut data = self.data.clone();
        for (row, &n) in data.chunks_exact_mut(self.dim).zip(&self.norms) {
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        let norms = data.chunks_exact(self.dim).map(l2_norm).collect();
        Self {
            data,
            dim: self.dim,
            norms,
            flagged: self.flagged.clone(),
        }
    }

    /// Writes the matrix in word2vec text format with a `count dim` header.
    pub fn write_word2vec<W: Write>(&self, vocab: &Vocabulary, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.rows(), self.dim)?;
        for i in 0..self.rows() {
            let word = vocab.lookup(i).ok_or(Error::IdOutOfRange {
                id: i,
                size: vocab.len(),
            })?;
            write!(w, "{word}")?;
            for x in self.row(i) {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fallback row for a vocabulary word absent from the embedding file:
/// uniform in `[-0.5/d, 0.5/d]`, seeded per row so the draw depends only on
/// `(seed, row)`.
pub fn fallback_row(seed: u64, row: usize, dim: usize) -> Vec<f64> {
    let mut r = rng::derived(seed, &[0xe3b0, row as u64]);
    let half = 0.5 / dim as f64;
    (0..dim).map(|_| r.gen_range(-half..=half)).collect()
}

pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_word2vec(BufReader::new(file), vocab, dim, seed)
}

/// Parses word2vec text format restricted to `vocab`. The first line may be
/// a `count dim` header. Words outside the vocabulary are skipped; the first
/// occurrence of a repeated word wins.
pub fn read_word2vec<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    if dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let rest: Vec<&str> = fields.collect();
        if lineno == 1 && rest.len() == 1 {
            if let (Ok(_), Ok(d)) = (word.parse::<u64>(), rest[0].parse::<usize>()) {
                if d != dim {
                    return Err(Error::DimMismatch {
                        line: lineno,
                        expected: dim,
                        found: d,
                    });
                }
                continue;
            }
        }
        if rest.len() != dim {
            return Err(Error::DimMismatch {
                line: lineno,
                expected: dim,
                found: rest.len(),
            });
        }
        let mut values = Vec::with_capacity(dim);
        for f in rest {
            let x: f64 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cannot parse {f:?} as a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite value {f:?}"),
                });
            }
            values.push(x);
        }
        if let Some(id) = vocab.get(word) {
            if rows[id].is_none() {
                rows[id] = Some(values);
            }
        }
    }

    let missing = rows.iter().filter(|r| r.is_none()).count();
    if missing > 0 {
        log::info!("{missing} of {} vocabulary words use fallback vectors", vocab.len());
    }
    let mut data = Vec::with_capacity(vocab.len() * dim);
    for (id, row) in rows.into_iter().enumerate() {
        match row {
            Some(v) => data.extend(v),
            None => data.extend(fallback_row(seed, id, dim)),
        }
    }
    EmbeddingMatrix::from_flat(data, dim)
}

/// Seeded uniform initialisation for every row, used when no pretrained
/// vectors are supplied.
pub fn random_embeddings(vocab_size: usize, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let data = (0..vocab_size)
        .flat_map(|i| fallback_row(seed, i, dim))
        .collect();
    EmbeddingMatrix::from_flat(data, dim)
}
