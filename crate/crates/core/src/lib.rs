//! Interpretable pairwise text-bias model.
//!
//! Documents are represented by the normalized sum of their word
//! embeddings `t̂`. A document's bias score is `s = t̂ᵀ(U + Uᵀ)t̂ + bᵀt̂`
//! and the probability that document `i` is more biased than `j` is
//! `σ(s_i − s_j)`. Parameters are fitted on revision pairs whose earlier
//! member is known to be the more biased one. Scores decompose into
//! per-word contributions for interpretation.

pub mod analysis;
pub mod baselines;
pub mod embeddings;
pub mod error;
pub mod ingest;
pub mod model;
pub mod synth;
pub mod textproc;
pub mod train;

pub use analysis::{EvalReport, GroupedDocument, RevisionRecord};
pub use baselines::{Lexicon, Preference};
pub use embeddings::{load_embeddings, EmbeddingTable, MeanKind};
pub use error::{Error, Result};
pub use ingest::{CorpusRecord, PovRegexSet, RevisionMeta};
pub use model::{load_model, save_model, BiasModel, RankOrder, ScoreKind, Variant, WordBiasReport};
pub use textproc::{featurize, tokenize, DocumentFeatures};
pub use train::{fit, RevisionPair, SplitSpec, TrainConfig, TrainingLog};
