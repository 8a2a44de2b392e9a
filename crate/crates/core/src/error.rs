use std::path::PathBuf;

use crate::svmseg::SvmModel;

/// Errors raised anywhere in the recognition pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("insufficient training data: {got} pixels, need at least {need}")]
    InsufficientTrainingData { got: usize, need: usize },

    #[error("invalid training region: {0}")]
    InvalidRegion(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("training did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        best: Box<SvmModel>,
    },

    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("invalid structuring element: {0}")]
    InvalidStructuringElement(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse failure: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("frame {frame}: {source}")]
    Frame {
        frame: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
