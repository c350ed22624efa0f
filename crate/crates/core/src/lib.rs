//! Consistent low-rank matrix completion by searching for a column space on
//! the Grassmann manifold.
//!
//! Given a subset of the entries of an m×n matrix of known rank r, the
//! [`solver`] looks for an r-dimensional column space geometrically
//! consistent with every observed column, by randomized geodesic gradient
//! descent on the Grassmann manifold ([`grassmann`]). The objective
//! ([`objective`]) scores each column by the squared sine of the smallest
//! principal angle between the candidate span and the column's consistency
//! set — a continuous surrogate for the masked least-squares residual, whose
//! zero set is the closure of the residual's. A found column space is turned
//! into a completed matrix by per-column projection.
//!
//! The [`verify`] module holds the independent oracles: finite-difference
//! gradient checks, the discontinuity probe, closure sequences, and seeded
//! Monte Carlo campaigns for the two scenarios with convergence guarantees
//! (rank-one with arbitrary sampling, and full sampling with arbitrary
//! rank).
//!
//! All numerical code is generic over the scalar type through
//! [`Real`]; the aliases at the crate root fix `f64`.

pub mod error;
pub mod grassmann;
pub mod io;
mod linalg;
pub mod objective;
pub mod scalar;
pub mod solver;
pub mod synth;
pub mod tolerances;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default scalar type for the concrete aliases below.
pub type Scalar = f64;

pub type Frame = grassmann::Frame<Scalar>;
pub type HorizontalTangent = grassmann::HorizontalTangent<Scalar>;
pub type GeodesicPath = grassmann::GeodesicPath<Scalar>;
pub type AngleSpectrum = grassmann::AngleSpectrum<Scalar>;

pub type Observations = objective::Observations<Scalar>;
pub type ColumnBasis = objective::ColumnBasis<Scalar>;
pub type AtomicWitness = objective::AtomicWitness<Scalar>;

pub type SolverConfig = solver::SolverConfig<Scalar>;
pub type SolverResult = solver::SolverResult<Scalar>;
pub type PerturbedFrame = solver::PerturbedFrame<Scalar>;

pub type AssumptionReport = verify::AssumptionReport<Scalar>;
pub type GeneratedProblem = synth::GeneratedProblem<Scalar>;
