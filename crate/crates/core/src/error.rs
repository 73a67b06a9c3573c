use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the name-origin library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("name is empty after normalization")]
    EmptyAfterNormalization,

    #[error("malformed encoding at row {row}: {reason}")]
    MalformedEncoding { row: usize, reason: &'static str },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("backward called without a recorded forward pass")]
    NoRecordedForward,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },

    #[error("model file checksum mismatch")]
    ChecksumMismatch,

    #[error("invalid model file: {0}")]
    InvalidModelFile(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown label {label:?} at line {line}")]
    UnknownLabel { line: usize, label: String },

    #[error("file contains no records")]
    EmptyFile,

    #[error("need at least 3 samples to split, got {0}")]
    TooFewSamples(usize),

    #[error("length mismatch: {left} labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("no mapped leaf nationality carries probability mass")]
    Unclassifiable,

    #[error("invalid weight scheme: {0}")]
    InvalidWeights(String),

    #[error("unknown origin {0:?}")]
    UnknownOrigin(String),

    #[error("missing mapping: {0}")]
    MissingMapping(String),

    #[error("no home-country set for origin {0:?}")]
    MissingHomeSet(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
