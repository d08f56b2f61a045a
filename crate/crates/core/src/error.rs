use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("candidate pool exhausted after selecting {achieved} of {requested} sequences")]
    Exhausted { achieved: usize, requested: usize },

    #[error("search budget of {budget} nodes exceeded: {what}")]
    SearchBudget { what: &'static str, budget: u64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated input: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("missing forward trace: backward requires a train-mode forward pass")]
    MissingTrace,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn mismatch(what: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            got,
        }
    }
}
