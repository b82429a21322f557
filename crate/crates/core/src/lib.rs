//! Phrase-boundary-aware skip-gram embeddings.
//!
//! Every word of an annotated phrase is trained against the same context:
//! the units (single words or whole phrases) around the phrase rather than
//! the words adjacent to each member. The crate covers the full pipeline
//! short of IO: annotation parsing, vocabulary construction, context
//! generation under four regimes, sampled-softmax training with sparse Adam,
//! and intrinsic evaluation (pairwise phrase similarity and analogies).
//!
//! The crate is `no_std` and needs only `alloc`. File formats, threads and
//! the command line live in the `sphrase` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod context;
pub mod corpus;
pub mod error;
pub mod eval;
mod math;
pub mod trainer;
pub mod vocab;

pub use context::{generate_pairs, reduced_window, segment_units, Regime, TrainingPair, Unit};
pub use corpus::{AnnotatedSentence, CorpusStats, PhraseSpan};
pub use error::{Error, Result};
pub use eval::{AnalogyQuestion, AnalogyReport, Embedding, SimilarityReport};
pub use trainer::{AdamState, EmbeddingModel, EpochStats, TrainConfig, Trainer};
pub use vocab::{EncodedSentence, NoiseDistribution, Vocabulary};

/// Default cap on annotated phrase length, in tokens.
pub const DEFAULT_MAX_PHRASE_LEN: usize = 10;
