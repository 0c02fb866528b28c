use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed caller input (bad indices, inconsistent shapes in constructors).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Breakdown, divergence or a non-finite intermediate.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A node with zero degree reached Laplacian construction.
    #[error("node {node} is isolated (zero degree); enable the self-loop policy to proceed")]
    IsolatedNode { node: usize },

    #[error("nonpositive pivot {pivot:e} at row {row} during incomplete Cholesky")]
    Factorization { row: usize, pivot: f64 },

    /// Dataset files that parse but do not make sense.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// Request outside the range a closed-form result covers.
    #[error("out of scope: {0}")]
    Scope(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(expected: usize, actual: usize) -> Self {
        Error::Dimension { expected, actual }
    }

    /// Prefix the message with the pipeline stage it came from.
    pub fn context(self, stage: &str) -> Self {
        match self {
            Error::Numerical(msg) => Error::Numerical(format!("{stage}: {msg}")),
            Error::Domain(msg) => Error::Domain(format!("{stage}: {msg}")),
            Error::Input(msg) => Error::Input(format!("{stage}: {msg}")),
            other => other,
        }
    }

    /// True for failures of the numerics (as opposed to bad configuration or input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Factorization { .. })
    }
}
