//! Central registry of the numerical tolerances used across the crate.
//!
//! All thresholds are calibrated for `f64` arithmetic. They are defined once
//! here so that the contracts of the geometry, objective and solver modules
//! stay consistent with each other and with the test suites.

/// Frame orthonormality: `‖UᵀU − I‖_F` must stay below this for every frame
/// produced by any operation. QR of a well-conditioned matrix lands around
/// 1e-15; 1e-10 leaves room for long chains of geodesic evaluations.
pub const ORTHONORMALITY: f64 = 1e-10;

/// Relative rank cutoff for orthonormalization and pseudoinverse solves:
/// singular values below `RANK_CUTOFF · σ_max` are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Horizontality check on tangent vectors: `‖UᵀH‖_F` above this is rejected.
pub const HORIZONTALITY: f64 = 1e-8;

/// A cosine this close to one is treated as an exactly closed principal
/// angle. The geodesic direction `g_i` has norm `√(1−λ_i²)`, which underflows
/// to noise past this point.
pub const UNIT_COSINE: f64 = 1e-12;

/// Gap `λ₁ − λ₂` below which the top singular pair of `B_iᵀU` is considered
/// tied; the atomic objective is non-smooth there and gradient consumers may
/// want to discard the witness.
pub const SINGULAR_GAP: f64 = 1e-12;

/// "First nonzero entry" in the singular-vector sign convention means first
/// entry with magnitude above this.
pub const SIGN_CONVENTION: f64 = 1e-14;

/// Membership threshold for the geometric solution set: a frame with
/// objective at or below this counts as geometrically consistent.
pub const GEOMETRIC_MEMBERSHIP: f64 = 1e-10;

/// Residual objective value below which a column counts as exactly
/// representable; the interior perturbation skips such columns.
pub const FROBENIUS_MEMBERSHIP: f64 = 1e-16;

use crate::scalar::Real;

/// An f64-calibrated tolerance carried to the working scalar: the constant
/// itself, floored at 500 machine epsilons of `T` so validation stays
/// meaningful at lower precisions (the floor is far below every constant
/// above for `f64`).
pub(crate) fn scaled<T: Real>(tolerance: f64) -> T {
    let floor = crate::scalar::machine_epsilon::<T>() * T::from_f64_lossy(500.0);
    T::from_f64_lossy(tolerance).max(floor)
}

/// The same floor applied to a threshold on a squared quantity (squared
/// norms, squared sines).
pub(crate) fn scaled_sq<T: Real>(tolerance: f64) -> T {
    let root = scaled::<T>(tolerance.sqrt());
    root * root
}
