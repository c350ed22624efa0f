//! Scalar abstraction for all numerical code in this crate.
//!
//! Everything is generic over [`Real`], a real field with the elementary
//! functions needed for subspace geometry (square roots, inverse cosines,
//! π constants). `f32` and `f64` both qualify; the concrete type aliases at
//! the crate root fix `f64`, which is what the tolerances in
//! [`crate::tolerances`] are calibrated for.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the geometry, objective and solver code.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {
    /// Converts an `f64` constant into `Self`, rounding if necessary.
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 constant")
    }

    /// Converts `self` to `f64` for reporting, rounding if necessary.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where T: RealField + FromPrimitive + ToPrimitive + Copy {}

/// Clamps `x` into `[lo, hi]`.
#[inline]
pub(crate) fn clamp<T: Real>(x: T, lo: T, hi: T) -> T {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

/// Machine epsilon of the working scalar.
#[inline]
pub(crate) fn machine_epsilon<T: Real>() -> T {
    <T as approx::AbsDiffEq>::default_epsilon()
}
