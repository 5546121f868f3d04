//! Error taxonomy shared by every module in the crate.

pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
///
/// Variants are grouped by contract kind rather than by module: invalid
/// static configuration, shape mismatches between tensors, invalid runtime
/// state (e.g. operating on an empty ensemble), malformed external data, and
/// numeric divergence during training.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor dimensions do not line up.
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// A function argument violates its precondition (empty input, length
    /// mismatch, missing class, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// The operation is not valid in the current object state (empty
    /// ensemble, pruning the last live member, ...).
    #[error("state error: {0}")]
    State(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: non-finite loss at step {step}")]
    TrainingDiverged { step: usize },

    /// Both candidate branches of one search iteration failed.
    #[error("iteration {t} failed: {message}")]
    Iteration { t: usize, message: String },

    /// A binary input file does not match the expected format.
    #[error("format error in {path} at byte offset {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    /// A text input file failed to parse.
    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    /// A file operation failed at the OS level.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an [`std::io::Error`] with the path it occurred on.
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
