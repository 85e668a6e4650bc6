use std::collections::BTreeMap;
use std::fs;

use nnrs_core::embedding::random_embeddings;
use nnrs_core::neighbors::default_k;
use nnrs_core::vocab::tokenize;
use nnrs_core::{load_embeddings, NeighborTable, TransitionTable, Vocabulary};
use serde::Serialize;

use crate::args::IndexArgs;
use crate::failure::{usage, CmdResult, Context};
use crate::manifest::{file_sha256, write_atomic};

const BINS: usize = 20;

#[derive(Debug, Serialize)]
struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
}

#[derive(Debug, Serialize)]
struct IndexStats {
    vocab_size: usize,
    corpus_tokens: usize,
    dim: usize,
    k: usize,
    tau: f64,
    valid_rows: usize,
    flagged_rows: usize,
    mean_neighbor_sim: f64,
    neighbor_sim_histogram: Histogram,
    /// Words with at least one observed successor.
    transition_rows: usize,
    inputs: BTreeMap<String, String>,
}

pub fn index_build(a: &IndexArgs) -> CmdResult {
    if a.k == Some(0) {
        return Err(usage("--k must be at least 1"));
    }
    let mut inputs = BTreeMap::new();
    inputs.insert("corpus".to_string(), file_sha256(&a.corpus)?);
    if let Some(p) = &a.embeddings {
        inputs.insert("embeddings".to_string(), file_sha256(p)?);
    }
    let text = fs::read_to_string(&a.corpus).map_err(|e| usage(format!("{}: {e}", a.corpus.display())))?;
    let tokens = tokenize(&text);
    let vocab = Vocabulary::build(&tokens, a.min_count)?;
    let emb = match &a.embeddings {
        Some(p) => load_embeddings(p, &vocab, a.dim, a.seed)?,
        None => random_embeddings(vocab.len(), a.dim, a.seed)?,
    };
    let k = a.k.unwrap_or_else(|| default_k(vocab.len()));
    let mut table = NeighborTable::build(&emb, k)?;
    if table.tau() != a.tau {
        table = table.renormalize(a.tau)?;
    }
    let ids = vocab.encode(&tokens);
    let transitions = TransitionTable::build(&ids, vocab.len(), k)?;

    let mut counts = vec![0u64; BINS];
    let (mut sum, mut n) = (0.0, 0usize);
    for w in (0..vocab.len()).filter(|&w| table.is_valid(w)) {
        for &s in table.sims(w) {
            let bin = (((s + 1.0) / 2.0 * BINS as f64) as usize).min(BINS - 1);
            counts[bin] += 1;
            sum += s;
            n += 1;
        }
    }
    let stats = IndexStats {
        vocab_size: vocab.len(),
        corpus_tokens: ids.len(),
        dim: emb.dim(),
        k,
        tau: table.tau(),
        valid_rows: emb.valid_rows(),
        flagged_rows: vocab.len() - emb.valid_rows(),
        mean_neighbor_sim: if n > 0 { sum / n as f64 } else { 0.0 },
        neighbor_sim_histogram: Histogram {
            lo: -1.0,
            hi: 1.0,
            counts,
        },
        transition_rows: (0..vocab.len()).filter(|&w| transitions.counts(w)[0] > 0).count(),
        inputs,
    };

    fs::create_dir_all(&a.out).or_runtime(format!("creating {}", a.out.display()))?;
    let mut buf = Vec::new();
    vocab.write_tsv(&mut buf).or_runtime("encoding vocabulary")?;
    write_atomic(&a.out.join("vocab.tsv"), &buf)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf).or_runtime("encoding neighbor table")?;
    write_atomic(&a.out.join("neighbors.csv"), &buf)?;
    let mut buf = Vec::new();
    transitions.write_csv(&mut buf).or_runtime("encoding transition table")?;
    write_atomic(&a.out.join("transitions.csv"), &buf)?;
    let mut json = serde_json::to_string_pretty(&stats).or_runtime("encoding stats")?;
    json.push('\n');
    write_atomic(&a.out.join("index_stats.json"), json.as_bytes())?;
    log::info!(
        "indexed {} words (k = {k}, {} without vectors) into {}",
        vocab.len(),
        stats.flagged_rows,
        a.out.display()
    );
    Ok(())
}
