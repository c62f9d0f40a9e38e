//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tag/token length mismatch: {tokens} tokens vs {tags} tags")]
    TagTokenLengthMismatch { tokens: usize, tags: usize },

    /// Line-addressed parse failure in a text input (CoNLL, embeddings, schema).
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("chunk text mismatch row {row}: offsets select {found:?}, column says {expected:?}")]
    ChunkTextMismatch {
        row: usize,
        expected: String,
        found: String,
    },

    /// Row-addressed failure in a training CSV (1-based data rows).
    #[error("row {row}: {msg}")]
    CsvRow { row: usize, msg: String },

    #[error("invalid dependency tree: {0}")]
    InvalidTree(String),

    #[error("dimension mismatch line {line}: expected {expected}, found {found}")]
    EmbeddingDim {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("batch too small for batch norm: got {0}, need at least 2")]
    BatchTooSmall(usize),

    #[error("need at least 2 classes, found {0}")]
    NotEnoughClasses(usize),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("unsupported model version {0}")]
    UnsupportedModelVersion(u32),

    #[error("model file corrupt: {0}")]
    ModelFormat(String),

    #[error("extraction failed for {count} document(s): {details}")]
    BatchFailures { count: usize, details: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
