use std::io;

/// Errors produced by the beamforming toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric input lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violates an operation's precondition (shape, count, range).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The effective channel is identically zero, so MRT is undefined.
    #[error("degenerate channel: effective channel is identically zero")]
    DegenerateChannel,

    /// A serialized file is malformed or has the wrong magic/version/shape.
    #[error("format error: {0}")]
    Format(String),

    /// An operation was invoked in the wrong state (e.g. missing forward cache).
    #[error("state error: {0}")]
    State(String),

    /// A numerical routine produced an inconsistent result.
    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
