use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Bad user input: malformed CSV cells, labels that do not form a
    /// contiguous class range, dimension mismatches and the like.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A structurally valid request that the data cannot support,
    /// e.g. `n <= K` or a class with zero rows.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Model-file problems: truncation, schema version mismatch,
    /// invariant violations found at save or load time.
    #[error("model file: {0}")]
    ModelFile(String),

    /// The solver hit its sweep budget where convergence is required.
    #[error("did not converge: {0}")]
    NonConvergence(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::InvalidInput(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
