//! Versioned binary checkpoints.
//!
//! Layout: the magic bytes, a `u32` version, then little-endian fields in
//! the order of [`Checkpoint`]. Strings and vectors are length-prefixed with
//! a `u64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::rng::StreamState;
use crate::trainer::EpochRecord;
use crate::vocab::Vocabulary;

const MAGIC: &[u8; 8] = b"NNRSCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GumbelState {
    pub k: usize,
    pub beta: f64,
    pub log_alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab_hash: [u8; 32],
    pub manifest_id: String,
    /// Canonical text of the training config.
    pub config: String,
    pub dims: ModelDims,
    pub params: Vec<f64>,
    pub velocity: Vec<f64>,
    pub epochs_done: usize,
    pub tau: f64,
    pub best_val: f64,
    pub policy_rng: StreamState,
    pub gumbel: Option<GumbelState>,
    pub records: Vec<EpochRecord>,
}

struct Enc<W: Write>(W);

impl<W: Write> Enc<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.0.write_all(b)?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.usize(s.len())?;
        self.bytes(s.as_bytes())
    }
    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        self.usize(v.len())?;
        v.iter().try_for_each(|x| self.f64(*x))
    }
}

struct Dec<R: Read>(R);

impl<R: Read> Dec<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(b)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflow".into()))
    }
    fn len(&mut self, limit: usize) -> Result<usize> {
        let n = self.usize()?;
        if n > limit {
            return Err(Error::Checkpoint(format!("implausible length {n}")));
        }
        Ok(n)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len(1 << 24)?;
        let mut b = vec![0u8; n];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        String::from_utf8(b).map_err(|_| Error::Checkpoint("invalid utf-8".into()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(1 << 32)?;
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut e = Enc(w);
        e.bytes(MAGIC)?;
        e.bytes(&VERSION.to_le_bytes())?;
        e.bytes(&self.vocab_hash)?;
        e.str(&self.manifest_id)?;
        e.str(&self.config)?;
        for d in [
            self.dims.vocab,
            self.dims.embed,
            self.dims.hidden,
            self.dims.layers,
        ] {
            e.usize(d)?;
        }
        e.f64s(&self.params)?;
        e.f64s(&self.velocity)?;
        e.usize(self.epochs_done)?;
        e.f64(self.tau)?;
        e.f64(self.best_val)?;
        e.bytes(&self.policy_rng.key)?;
        e.u64(self.policy_rng.stream)?;
        e.bytes(&self.policy_rng.word_pos.to_le_bytes())?;
        match &self.gumbel {
            None => e.bytes(&[0])?,
            Some(g) => {
                e.bytes(&[1])?;
                e.usize(g.k)?;
                e.f64(g.beta)?;
                e.f64s(&g.log_alpha)?;
            }
        }
        e.usize(self.records.len())?;
        for r in &self.records {
            e.usize(r.epoch)?;
            for v in [
                r.epsilon,
                r.gamma,
                r.tau,
                r.train_loss,
                r.val_ppl,
                r.best_val_ppl,
                r.lr,
                r.wall_time,
            ] {
                e.f64(v)?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut d = Dec(r);
        if &d.array::<8>()? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(d.array()?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (expected {VERSION})"
            )));
        }
        let vocab_hash = d.array()?;
        let manifest_id = d.str()?;
        let config = d.str()?;
        let dims = ModelDims::new(d.usize()?, d.usize()?, d.usize()?, d.usize()?)?;
        let params = d.f64s()?;
        let velocity = d.f64s()?;
        let epochs_done = d.usize()?;
        let tau = d.f64()?;
        let best_val = d.f64()?;
        let policy_rng = StreamState {
            key: d.array()?,
            stream: d.u64()?,
            word_pos: u128::from_le_bytes(d.array()?),
        };
        let gumbel = match d.array::<1>()?[0] {
            0 => None,
            1 => Some(GumbelState {
                k: d.usize()?,
                beta: d.f64()?,
                log_alpha: d.f64s()?,
            }),
            t => return Err(Error::Checkpoint(format!("bad gumbel tag {t}"))),
        };
        let n = d.len(1 << 24)?;
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            records.push(EpochRecord {
                epoch: d.usize()?,
                epsilon: d.f64()?,
                gamma: d.f64()?,
                tau: d.f64()?,
                train_loss: d.f64()?,
                val_ppl: d.f64()?,
                best_val_ppl: d.f64()?,
                lr: d.f64()?,
                wall_time: d.f64()?,
            });
        }
        Ok(Self {
            vocab_hash,
            manifest_id,
            config,
            dims,
            params,
            velocity,
            epochs_done,
            tau,
            best_val,
            policy_rng,
            gumbel,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }

    /// Fails unless the checkpoint was written for `vocab`.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let h = vocab.hash();
        if h != self.vocab_hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash mismatch: checkpoint {}, current {}",
                hex::encode(self.vocab_hash),
                hex::encode(h)
            )));
        }
        Ok(())
    }
}
