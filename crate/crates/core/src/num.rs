//! Scalar abstraction for all time- and ratio-valued math.

use std::fmt;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used for timestamps, durations and overhead ratios.
///
/// Implemented by `f32` and `f64`; everything downstream picks one via a type
/// parameter instead of hardcoding the width.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for literals and RNG output.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }

    /// Lossy conversion to `f64`, for reporting and error messages.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + fmt::Debug
        + fmt::Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Shorthand for `T::from_f64_lossy` in const-less contexts.
pub(crate) fn scalar<T: Scalar>(v: f64) -> T {
    T::from_f64_lossy(v)
}
