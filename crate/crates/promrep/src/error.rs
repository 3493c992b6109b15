//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A decode frame admits no state (every emission is -inf).
    #[error("degenerate input: frame {frame} has no admissible state (all emissions -inf)")]
    DegenerateFrame { frame: usize },

    /// Failure of one sequence inside a batch; other sequences are unaffected.
    #[error("sequence {index}: {source}")]
    BatchItem {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed file contents (WAV, archive, posteriorgram validation).
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Attach a batch index to an error from one sequence.
    pub(crate) fn in_batch(self, index: usize) -> Self {
        Error::BatchItem {
            index,
            source: Box::new(self),
        }
    }
}
