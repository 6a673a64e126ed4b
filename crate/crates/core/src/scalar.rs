//! Scalar abstraction for the numeric kernels.

use num_traits::FromPrimitive;

/// Floating-point scalar the library is generic over.
///
/// All shipped tolerances are calibrated for `f64`; `f32` works for
/// exploratory use at correspondingly loose tolerances.
pub trait Real:
    nalgebra::RealField + FromPrimitive + Copy + Send + Sync + std::fmt::Display + std::fmt::LowerExp
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must convert into the scalar type")
}
