use thiserror::Error;

/// Errors surfaced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or matrix shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Parameters describe a degenerate object (point mass, zero metric, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A root bracket did not straddle a sign change.
    #[error("bracketing failure: {0}")]
    Bracket(String),

    /// An iterative scheme hit its iteration cap without converging.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// The requested problem size exceeds the configured safety limit.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// Mutually inconsistent specifications were supplied.
    #[error("inconsistent specification: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
