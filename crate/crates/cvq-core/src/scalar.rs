use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type of the covariance algebra: `f32` or `f64`.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable")
}

/// Base-2 logarithm.
#[inline]
pub(crate) fn log2<T: Real>(x: T) -> T {
    x.ln() / T::ln_2()
}
