use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({src}, {dst}) at position {index} references a node outside 0..{num_nodes}")]
    EdgeOutOfRange {
        index: usize,
        src: usize,
        dst: usize,
        num_nodes: usize,
    },

    #[error("{op}: shape mismatch {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("checkpoint incompatible: {0}")]
    Checkpoint(String),

    #[error("non-finite loss at step {step} (lr {lr:.3e}); largest gradient norms: {grad_norms}")]
    NonFiniteLoss {
        step: usize,
        lr: f64,
        grad_norms: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad inputs or configuration rather than a
    /// failure while running.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::EdgeOutOfRange { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Config(_)
                | Error::InvalidInput(_)
                | Error::Checkpoint(_)
        )
    }
}
