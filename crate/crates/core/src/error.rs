//! Error type shared by every module in this crate.

use std::path::PathBuf;

/// Crate-wide error type.
///
/// Per-row problems in CSV files are *not* errors; they are reported as
/// [`crate::ingest::Diagnostic`] values so that one bad row never aborts a
/// stream. `Error` is reserved for conditions that invalidate the whole
/// operation: unreadable files, header mismatches, contract violations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("header mismatch at column {position}: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Contract violation on an operation's input (empty matrix, multiclass
    /// labels fed to a binary learner, class too small for k folds, ...).
    #[error("{0}")]
    InvalidInput(String),

    /// Feature schema of a prediction input does not match the schema the
    /// model was trained with.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("model file error: {0}")]
    ModelFormat(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
