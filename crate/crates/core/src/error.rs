//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error. Variants are grouped by what the caller can do about
/// them: `Config` means the request itself is wrong, `Data`/`Csv`/`Io` mean
/// the inputs are unusable, `Numeric` means a computation failed to converge
/// or produced non-finite values.
#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem failure while reading or writing an artifact.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV input; the message cites the offending location.
    #[error("csv error: {0}")]
    Csv(String),

    /// Input data violates a precondition (wrong shape, missing column,
    /// non-finite value, degenerate split, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Caller-supplied parameter outside its valid domain.
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure: non-convergence, singular system, or a non-finite
    /// intermediate that retries could not repair.
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
