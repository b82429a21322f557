use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed annotation: {reason}")]
    MalformedAnnotation { line: usize, reason: String },
    #[error("no token reaches the minimum count of {min_count}")]
    EmptyVocabulary { min_count: u64 },
    #[error("invalid token {0:?}: tokens must be non-empty and free of whitespace")]
    InvalidToken(String),
    #[error("corpus produced no training pairs")]
    EmptyCorpus,
    #[error("non-finite value in {0}")]
    NumericalError(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("need at least two phrases to draw comparison words, found {0}")]
    InsufficientPhrases(usize),
    #[error("line {line}: malformed analogy file: {reason}")]
    MalformedAnalogyFile { line: usize, reason: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
