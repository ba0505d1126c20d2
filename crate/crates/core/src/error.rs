use thiserror::Error;

use crate::states::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{what} = {value} exceeds the configured cap {cap}")]
    CapExceeded {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid occupation: {0}")]
    InvalidOccupation(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |A - A^dagger| = {max_dev:e})")]
    NotHermitian { max_dev: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("density matrix trace {trace} differs from one")]
    NotTraceOne { trace: f64 },

    #[error("matrix is not unitary (max |U^dagger U - 1| = {max_dev:e})")]
    NotUnitary { max_dev: f64 },

    #[error("invalid internal state: {0}")]
    InvalidState(ValidationReport),

    #[error("Pauli exclusion violated: {0}")]
    PauliViolation(String),

    #[error("measure is undefined for a single particle labeling (R = 1)")]
    Degenerate,

    #[error("outcome labels differ between distributions")]
    LabelMismatch,

    #[error("non-physical outcome distribution: {0}")]
    NonPhysical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}
