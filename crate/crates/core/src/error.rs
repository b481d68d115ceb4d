use thiserror::Error;

/// Errors produced by the library.
///
/// The three variants map onto the CLI exit codes: `Domain` is a
/// configuration/input problem (exit 2), while `Degenerate` and `Numerical`
/// are runtime failures of the numerical machinery (exit 3).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument was outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The empirical field is degenerate (zero variance) where the
    /// operation needs a non-degenerate one.
    #[error("degenerate field: {0}")]
    Degenerate(String),

    /// An iterative routine failed to converge or a factorization failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
