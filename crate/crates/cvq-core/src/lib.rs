//! Covariance-matrix toolkit for Gaussian quantum information, with the
//! collective-attack secret-key-rate bounds used in continuous-variable QKD
//! security analysis.
//!
//! Conventions used throughout:
//!
//! - Quadrature ordering is `(Q1, P1, Q2, P2, ...)`.
//! - Shot-noise units: the vacuum covariance matrix is the identity, i.e.
//!   `gamma_kl = <{X_k - d_k, X_l - d_l}_+>` with `[Q, P] = i`.
//! - All entropies and rates are in bits (base-2 logarithms).
//!
//! The linear-algebra core is generic over the scalar type via [`Real`]
//! (`f32` or `f64`); concrete `f64` aliases are exported at the crate root
//! and are what the higher layers (protocol simulation, CLI) consume.

pub mod channel;
pub mod error;
pub mod gaussian;
pub mod keyrate;
pub mod measurement;
pub mod protocol;
mod scalar;

pub use error::CoreError;
pub use scalar::Real;

pub use channel::GaussianChannel;
pub use gaussian::{GaussianState, SymplecticForm, Validity};
pub use keyrate::{BobMeasurement, KeyRateReport, Prep, ProtocolConfig, RateOptions, Recon};
pub use measurement::{ConditionalResult, MeasurementKind};
pub use protocol::{EstimatedMoments, SampleBatch};

/// Concrete double-precision aliases for the generic core types.
pub type GaussianState64 = GaussianState<f64>;
pub type GaussianChannel64 = GaussianChannel<f64>;
pub type ConditionalResult64 = ConditionalResult<f64>;
pub type ProtocolConfig64 = ProtocolConfig<f64>;
pub type KeyRateReport64 = KeyRateReport<f64>;

/// Single-precision aliases, for callers that trade accuracy for footprint.
pub type GaussianState32 = GaussianState<f32>;
pub type GaussianChannel32 = GaussianChannel<f32>;
