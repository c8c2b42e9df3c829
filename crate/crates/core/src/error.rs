use std::path::PathBuf;

use thiserror::Error;

use crate::month::Month;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("depth {depth} m is outside the profile span [{min}, {max}] m")]
    OutOfRange { depth: f64, min: f64, max: f64 },

    #[error("chronology error at position {position}: expected {expected}, found {found}")]
    Chronology {
        position: usize,
        expected: Month,
        found: Month,
    },

    #[error("layering failed for month {month}: {source}")]
    Layering {
        month: Month,
        #[source]
        source: Box<Error>,
    },

    #[error("window needs months {first}..{last} but the series covers {have_first}..{have_last}")]
    Window {
        first: Month,
        last: Month,
        have_first: Month,
        have_last: Month,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged in layer {layer} at epoch {epoch}")]
    Divergence { layer: usize, epoch: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("least-squares solver failed: {0}")]
    Solver(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dim(what: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            found,
        }
    }

    /// True for errors raised by numerical divergence during training.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFinite(_))
    }
}
