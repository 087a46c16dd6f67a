use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants that describe bad input data are "domain" errors (the CLI maps
/// them to exit code 1); everything here is a domain error except usage
/// mistakes, which never reach this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown class label {0:?}")]
    UnknownLabel(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("corrupt image: {0}")]
    CorruptImage(String),

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("patch origin ({x}, {y}) lies outside a {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("no recorded prediction for patch {0:?}")]
    MissingPrediction(String),

    #[error("patch {patch_id}: {source}")]
    Patch {
        patch_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_line(line: usize, err: Error) -> Self {
        Error::AtLine {
            line,
            source: Box::new(err),
        }
    }

    pub(crate) fn file(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
