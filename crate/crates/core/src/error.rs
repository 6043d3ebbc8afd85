use crate::trace::Trace;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The objective exceeded the divergence guard. The partial trace up to the
    /// last finite evaluation is preserved.
    #[error("solver diverged at epoch {epoch} (objective {objective:e})")]
    Diverged {
        epoch: f64,
        objective: f64,
        trace: Box<Trace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
