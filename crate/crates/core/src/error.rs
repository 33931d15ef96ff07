use thiserror::Error;

/// Errors produced by the factorization library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is singular")]
    SingularInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("factor product is not a rotation (orthogonality defect {defect:e}, det {det})")]
    NotARotation { defect: f64, det: f64 },

    #[error("target angle {target} rad unreachable; largest achievable is {max_achievable} rad")]
    TargetUnreachable { target: f64, max_achievable: f64 },

    #[error("matrix is not orthogonal (defect {defect:e})")]
    NotOrthogonal { defect: f64 },

    #[error("orthogonal matrix has negative determinant")]
    NegativeDeterminant,

    #[error("determinant not positive ({det:e})")]
    NonPositiveDeterminant { det: f64 },

    #[error("invalid step: {0}")]
    InvalidStep(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
