//! Nearest-neighbor replacement sampling for recurrent language models.
//!
//! The crate covers the whole pipeline: vocabulary and embedding loading,
//! neighbor and transition tables, sampling-rate curricula, the per-token
//! source policy, a from-scratch LSTM language model, the training loop and
//! the evaluation metrics.

pub mod embedding;
pub mod error;
pub mod metrics;
pub mod model;
pub mod neighbors;
pub mod policy;
pub mod rng;
pub mod schedule;
pub mod synth;
pub mod trainer;
pub mod vocab;

pub use embedding::{load_embeddings, EmbeddingMatrix};
pub use error::{Error, Result};
pub use metrics::{bleu4, kl_decomposition, self_bleu4, wmd_score, Metric, ScoreReport, ToyChain};
pub use model::{Decoding, LstmLm, ModelDims};
pub use neighbors::{CentroidScale, NeighborTable, ReplacementSource, TransitionTable};
pub use policy::{GumbelLogits, Mode, PolicyState, TokenDecision, TokenSource};
pub use schedule::{Schedule, ScheduleKind};
pub use trainer::{Checkpoint, EpochRecord, TrainConfig, TrainData, Trainer};
pub use vocab::Vocabulary;
