use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nnrs_core::ScheduleKind;

/// Neighbor replacement sampling for recurrent language models.
#[derive(Debug, Parser)]
#[command(name = "nnrs", version, about)]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Neighbor and transition tables.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Train a model from a key = value config file.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Sampling-rate curves.
    #[command(subcommand)]
    Schedule(ScheduleCommand),
    /// Token-source decisions.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Per-term KL decomposition for two toy Markov chains.
    KlDiag(KlArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Write vocab.tsv, neighbors.csv, transitions.csv and index_stats.json.
    Build(IndexArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Whitespace-tokenized training text.
    #[arg(long)]
    pub corpus: PathBuf,
    /// word2vec text vectors; seeded random vectors when omitted.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Neighbors per word; round(log2 |V|) when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    /// Softmax temperature of the stored neighbor probabilities.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from checkpoint.bin in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Stop once this many epochs are complete.
    #[arg(long)]
    pub stop_after: Option<usize>,
    /// Write decisions.csv even if the config leaves `trace` off.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Comma-separated: bleu, wmd, self_bleu, self_wmd, ppl, quality, diversity.
    #[arg(long, default_value = "quality")]
    pub metrics: String,
    /// Teacher-forced tokens before generation.
    #[arg(long, default_value_t = 5)]
    pub prefix: usize,
    /// Generated tokens per segment.
    #[arg(long, default_value_t = 10)]
    pub continuation: usize,
    /// Sequences per batch for the self metrics.
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    /// Value of the config column; the training mode when omitted.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ScheduleCommand {
    /// CSV `epoch,z,rate` for epochs 0..=N.
    Emit(ScheduleArgs),
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: ScheduleKind,
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    #[arg(long)]
    pub end: f64,
    #[arg(long)]
    pub epochs: usize,
}

fn parse_kind(s: &str) -> Result<ScheduleKind, String> {
    s.parse().map_err(|e: nnrs_core::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum SampleCommand {
    /// Decisions for one epoch's batches, without updating the model.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Trace from this checkpoint's state instead of a fresh model.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub epoch: usize,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Conditional,
    Printed,
}

#[derive(Debug, Args)]
pub struct KlArgs {
    /// Data chain: whitespace-separated transition rows.
    #[arg(long)]
    pub p: PathBuf,
    /// Model chain, same format.
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = FormArg::Conditional)]
    pub form: FormArg,
}
