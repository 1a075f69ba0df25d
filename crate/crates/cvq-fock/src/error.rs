use thiserror::Error;

/// Errors from the Fock-space oracle.
#[derive(Debug, Error)]
pub enum FockError {
    #[error("syntax error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("truncation budget exceeded: tail mass {tail_mass:.3e} > {budget:.3e} (try cutoff >= {suggested_cutoff})")]
    Truncation {
        tail_mass: f64,
        budget: f64,
        suggested_cutoff: usize,
    },

    #[error("mode count mismatch: {context}")]
    ModeMismatch { context: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density matrix violates {invariant}: {value:.3e} beyond {tolerance:.3e}")]
    NotAdmitted {
        invariant: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("degenerate state: {reason}")]
    Degenerate { reason: String },

    #[error("measurement grid insufficient: completeness defect {defect:.3e} exceeds {budget:.3e}")]
    GridDefect { defect: f64, budget: f64 },

    #[error("Gaussian density construction failed: {reason}")]
    Gaussianification { reason: String },

    #[error("first/second moments differ from the reference by {deviation:.3e} (limit {limit:.3e})")]
    MomentMismatch { deviation: f64, limit: f64 },

    #[error(transparent)]
    Core(#[from] cvq_core::CoreError),
}
