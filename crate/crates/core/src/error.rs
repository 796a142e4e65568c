use thiserror::Error;

/// Errors produced by the measures, transport, barycenter and Bayes layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability level or parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix failed a structural check (symmetry, positive definiteness).
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Two models cannot be transported onto each other in closed form.
    #[error("incompatible models: {0}")]
    Incompatible(String),

    /// Invalid argument or configuration.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Weights are negative or do not sum to one.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// An exact discrete solver would exceed its configured size cap.
    #[error("problem size {size} exceeds solver cap {cap}; subsample the inputs")]
    SizeCap { size: usize, cap: usize },

    /// Quadrature or an iterative method did not reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
