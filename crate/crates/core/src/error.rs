use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row alignment error: {0}")]
    Alignment(String),

    #[error("parse error in {file} at row {row}, column {column}: {message}")]
    Parse {
        file: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed document {path}: {message}")]
    Document { path: String, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u64, expected: u64 },

    #[error("checkpoint integrity error in block `{block}`: {message}")]
    Integrity { block: String, message: String },

    #[error("non-finite gradient in block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("training diverged at epoch {epoch} (lr = {lr}): loss is {loss}")]
    Divergence { epoch: usize, lr: f64, loss: f64 },

    #[error("incompatible transfer: {0}")]
    Transfer(String),

    #[error("feature selection error: {0}")]
    Selection(String),

    #[error("rank deficient system: {0}")]
    Rank(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::NonFiniteGradient { .. } => 3,
            Error::Transfer(_) => 4,
            _ => 2,
        }
    }
}
