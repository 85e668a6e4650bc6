//! Corpus tokenization and vocabulary construction.
//!
//! Tokens are whitespace separated; every line ends with an end-of-sentence
//! marker, following the usual language-modelling preprocessing. The
//! vocabulary is ordered by descending frequency with lexicographic
//! tie-breaking so the id assignment is a pure function of the corpus.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

/// Splits text into tokens, appending [`EOS`] after each non-empty line.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let before = out.len();
        out.extend(line.split_whitespace().map(str::to_owned));
        if out.len() > before {
            out.push(EOS.to_owned());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    unk_id: usize,
    eos_id: usize,
}

impl Vocabulary {
    /// Builds a vocabulary holding every token seen at least `min_count`
    /// times. Tokens below the threshold fold into the `<unk>` count.
    pub fn build<S: AsRef<str>>(corpus: &[S], min_count: u64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for tok in corpus {
            *freq.entry(tok.as_ref()).or_default() += 1;
        }

        let mut dropped = 0u64;
        let mut kept: Vec<(&str, u64)> = Vec::with_capacity(freq.len());
        for (tok, count) in freq {
            if count >= min_count || tok == UNK || tok == EOS {
                kept.push((tok, count));
            } else {
                dropped += count;
            }
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens: Vec<String> = kept.iter().map(|(t, _)| (*t).to_owned()).collect();
        let mut counts: Vec<u64> = kept.iter().map(|(_, c)| *c).collect();
        for special in [UNK, EOS] {
            if !tokens.iter().any(|t| t == special) {
                tokens.push(special.to_owned());
                counts.push(0);
            }
        }
        let mut vocab = Self::from_parts(tokens, counts)?;
        vocab.counts[vocab.unk_id] += dropped;
        Ok(vocab)
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate token {tok:?}")));
            }
        }
        let unk_id = *index
            .get(UNK)
            .ok_or_else(|| Error::invalid("vocabulary lacks <unk>"))?;
        let eos_id = *index
            .get(EOS)
            .ok_or_else(|| Error::invalid("vocabulary lacks <eos>"))?;
        Ok(Self {
            tokens,
            counts,
            index,
            unk_id,
            eos_id,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> usize {
        self.unk_id
    }

    pub fn eos_id(&self) -> usize {
        self.eos_id
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the unknown-word id.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(self.unk_id)
    }

    pub fn lookup(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Writes one `token<TAB>count` line per entry, in id order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (tok, count) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{tok}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected token<TAB>count".into(),
            })?;
            let count = count.parse::<u64>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad count: {e}"),
            })?;
            tokens.push(tok.to_owned());
            counts.push(count);
        }
        Self::from_parts(tokens, counts)
    }

    pub fn to_tsv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// SHA-256 of the serialized vocabulary; checkpoints use it to refuse a
    /// mismatched vocabulary.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_tsv_bytes()).into()
    }
}
