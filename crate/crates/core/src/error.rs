use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by data loading, model construction and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate rating for user {user:?}, item {item:?}")]
    DuplicateRating { line: u64, user: String, item: String },
    #[error("line {line}: rating {value} outside scale [{min}, {max}]")]
    OutOfScale {
        line: u64,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("no ratings")]
    NoRatings,
    #[error("rating index out of range: user {user} (of {num_users}), item {item} (of {num_items})")]
    IndexOutOfRange {
        user: usize,
        item: usize,
        num_users: usize,
        num_items: usize,
    },
    #[error("split fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("length mismatch: {predictions} predictions vs {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("malformed parameter file: {0}")]
    Format(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self.root(), Error::Divergence(_))
    }

    pub fn is_usage(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidParameter(_) | Error::InvalidFraction(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
