//! Brute-force oracle in truncated Fock space.
//!
//! Builds Gaussian and non-Gaussian density matrices from a small state
//! grammar, extracts first and second moments, computes entropies and
//! discretized heterodyne measurements, and checks the entropy and Holevo
//! inequalities that underpin the Gaussian-extremality security argument.

pub mod classical;
pub mod density;
pub mod error;
pub mod gap;
pub mod ops;
pub mod povm;
pub mod spec;
pub mod verify;

pub use density::{moments, realize, FockDensity};
pub use error::FockError;
pub use gap::{contraction_check, extremality_gap, ExtremalityReport, GapOptions};
pub use spec::{parse_state_spec, StateSpec};

/// Default photon-number cutoff per mode.
pub const DEFAULT_CUTOFF: usize = 40;
/// Default tail-mass budget for admitting a state to a verification run.
pub const DEFAULT_TAIL_BUDGET: f64 = 1e-6;
