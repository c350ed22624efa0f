use thiserror::Error;

/// Errors produced by the geometry, objective, solver and verification
/// operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix does not have full column rank (σ_min/σ_max below the
    /// rank cutoff).
    #[error("rank-deficient input: σ_min/σ_max = {ratio:.3e}")]
    RankDeficient { ratio: f64 },

    /// Requested subspace dimension is outside `1 ≤ r ≤ m`.
    #[error("invalid dimensions: r = {r} must satisfy 1 ≤ r ≤ m = {m}")]
    InvalidDimension { m: usize, r: usize },

    /// Operands live in incompatible spaces.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A tangent vector is not horizontal at its base frame.
    #[error("tangent is not horizontal: ‖UᵀH‖_F = {residual:.3e}")]
    NotHorizontal { residual: f64 },

    /// Column or row index outside the valid range.
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// Rank requested from the solver is invalid for the problem.
    #[error("invalid rank {r} for an {m}-row problem")]
    InvalidRank { r: usize, m: usize },

    /// Line search started in a non-descent direction.
    #[error("not a descent direction: initial derivative {derivative:.3e} ≥ 0")]
    NotDescent { derivative: f64 },

    /// Observations admit no rank-one completion: a cycle in the ratio graph
    /// is inconsistent beyond tolerance.
    #[error(
        "no rank-one completion: entry ({row}, {col}) conflicts by relative error {relative:.3e}"
    )]
    Inconsistent {
        row: usize,
        col: usize,
        relative: f64,
    },

    /// A structurally-zero observation contradicts nonzero propagated values.
    #[error(
        "no rank-one completion: observed zero at ({row}, {col}) conflicts with nonzero factors"
    )]
    ZeroPattern { row: usize, col: usize },

    /// Matrix has numerical rank below the requested one.
    #[error("numerical rank below {r}: σ_{r}/σ_1 = {ratio:.3e}")]
    RankTooLow { r: usize, ratio: f64 },

    /// A frame that must lie in the geometric solution set does not.
    #[error("frame is not geometrically consistent: f_G = {objective:.3e}")]
    NotInSolutionSet { objective: f64 },

    /// Probe grid value outside the admissible interval.
    #[error("grid value {value} outside [-1/√2, 1/√2]")]
    GridOutOfRange { value: f64 },

    /// The optimum's span does not meet the column basis span.
    #[error("span intersection with column {column} basis is trivial")]
    EmptyIntersection { column: usize },

    /// Campaign parameters contradict the requested scenario.
    #[error("invalid scenario parameters: {context}")]
    InvalidScenarioParameters { context: String },

    /// Synthetic problem specification is unsatisfiable.
    #[error("invalid problem specification: {context}")]
    InvalidSpec { context: String },

    /// Malformed input file; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
