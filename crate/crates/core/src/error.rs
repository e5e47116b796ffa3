use thiserror::Error;

/// Errors raised by model ingestion, the numerical kernels and the analyses.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlexError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("quadratic form is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("matrix is singular (pivot {pivot:.3e} at step {step})")]
    Singular { step: usize, pivot: f64 },

    #[error("matrix has row rank {rank} < {rows}")]
    RankDeficient { rank: usize, rows: usize },

    #[error("{solver} exceeded its iteration limit of {limit}")]
    IterationLimit { solver: &'static str, limit: usize },

    #[error("no active set of size {size} admits feasible multipliers")]
    NoCandidates { size: usize },

    #[error("feasibility function is unbounded below at the given parameters")]
    UnboundedPsi,

    #[error("no parameter realization reaches the feasibility boundary; the index is unbounded")]
    UnboundedIndex,

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("the model has no hyperbox block")]
    MissingHyperbox,
}

pub type Result<T, E = FlexError> = std::result::Result<T, E>;
