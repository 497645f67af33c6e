//! Crate-wide error type.

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes of matrices/vectors do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical operation failed (singular or ill-conditioned matrix,
    /// eigensolver non-convergence, indefinite input to a factorization).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A configured capacity (e.g. the value-table piece budget) would be
    /// exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// No stabilizable actuator choice exists at some greedy round.
    #[error("unstabilizable architecture: {0}")]
    Unstabilizable(String),

    /// An operation that needs recorded transitions was called on an empty
    /// history.
    #[error("empty history: at least one recorded transition is required")]
    EmptyHistory,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
