use thiserror::Error;

/// Errors produced by the covariance-level operations.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("covariance matrix is not symmetric (max |g - g^T| = {defect})")]
    NonSymmetric { defect: f64 },

    #[error("state violates the Heisenberg constraint (min symplectic eigenvalue {min_nu})")]
    Unphysical { min_nu: f64 },

    #[error("covariance matrix is not positive definite")]
    NonPositive,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode index {index} out of range for {n_modes}-mode state")]
    ModeOutOfRange { index: usize, n_modes: usize },

    #[error("operation requires at least {needed} modes, state has {got}")]
    TooFewModes { needed: usize, got: usize },

    #[error("channel is not completely positive")]
    NotCompletelyPositive,

    #[error("estimated covariance cannot be repaired into a physical state: {reason}")]
    UnrepairableEstimate { reason: String },

    #[error("sample batch too small: need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}
