use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated (bad depth, p out of range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two objects that must share a time grid or dimensions do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A vector field was asked for a derivative it does not provide.
    #[error("unsupported vector field: {0}")]
    UnsupportedField(String),

    /// A solver state left the admissible region (|y| > blow-up guard) or
    /// produced non-finite values.
    #[error("numerical divergence at t = {time}")]
    Diverged { time: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::GridMismatch(msg.into())
}
