//! Observation model and the two consistency objectives.
//!
//! For an m×n matrix observed on an index set Ω, consistency of a candidate
//! column space `span(U)` is scored per column and summed:
//!
//! * the residual (Frobenius) objective
//!   `f_{F,i}(U) = min_w ‖x_{Ω,i} − P_{Ω,i}(Uw)‖²`, which is zero exactly
//!   when the observed part of column `i` lies in the span of the row-masked
//!   frame — but is discontinuous in `U`;
//! * the geometric objective `f_{G,i}(U) = 1 − λ_max²(B_iᵀU)`, where the
//!   orthonormal basis `B_i = [x̄_{Ω,i}, e_k : k ∉ Ω_i]` spans every full
//!   column consistent with the observed one. This equals the squared sine
//!   of the smallest principal angle between `span(U)` and `span(B_i)` and
//!   is continuous everywhere.
//!
//! The geometric objective has the closed-form Euclidean gradient
//! `G_i = −2λ b_i v_iᵀ` (top singular triple of `B_iB_iᵀU`), and the
//! Riemannian gradient is its horizontal projection
//! `∇_U f_G = (I − UUᵀ) Σ_i G_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grassmann::{Frame, HorizontalTangent};
use crate::linalg;
use crate::scalar::{clamp, Real};
use crate::tolerances;

/// Which objective to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Sum of per-column squared sines of the smallest principal angle.
    Geometric,
    /// Sum of per-column masked least-squares residuals.
    Frobenius,
}

/// Partial observations of an m×n matrix: per column, the strictly
/// ascending list of observed row indices (0-based) and the observed values.
///
/// A column may be empty or fully observed.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations<T: Real> {
    m: usize,
    n: usize,
    columns: Vec<ObservedColumn<T>>,
}

/// One observed column.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedColumn<T: Real> {
    rows: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> ObservedColumn<T> {
    /// Observed row indices, strictly ascending, 0-based.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Observed values, aligned with [`Self::rows`].
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True when every observed value is exactly zero (or nothing is
    /// observed).
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    /// Euclidean norm of the observed values.
    pub fn norm(&self) -> T {
        self.values
            .iter()
            .map(|&v| v * v)
            .fold(T::zero(), |acc, x| acc + x)
            .sqrt()
    }
}

impl<T: Real> Observations<T> {
    /// Empty observation set for an m×n matrix.
    pub fn empty(m: usize, n: usize) -> Self {
        Observations {
            m,
            n,
            columns: vec![
                ObservedColumn {
                    rows: Vec::new(),
                    values: Vec::new(),
                };
                n
            ],
        }
    }

    /// Builds an observation set from `(row, column, value)` triplets with
    /// 0-based indices. Duplicate positions are rejected.
    pub fn from_triplets<I>(m: usize, n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut per_column: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, j, value) in triplets {
            if i >= m {
                return Err(Error::IndexOutOfRange { index: i, len: m });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, len: n });
            }
            per_column[j].push((i, value));
        }
        let mut columns = Vec::with_capacity(n);
        for (j, mut entries) in per_column.into_iter().enumerate() {
            entries.sort_by_key(|&(i, _)| i);
            for window in entries.windows(2) {
                if window[0].0 == window[1].0 {
                    return Err(Error::InvalidSpec {
                        context: format!(
                            "duplicate observation at row {}, column {}",
                            window[0].0, j
                        ),
                    });
                }
            }
            let (rows, values) = entries.into_iter().unzip();
            columns.push(ObservedColumn { rows, values });
        }
        Ok(Observations { m, n, columns })
    }

    /// Full observation of a dense matrix.
    pub fn from_dense(x: &DMatrix<T>) -> Self {
        let columns = (0..x.ncols())
            .map(|j| ObservedColumn {
                rows: (0..x.nrows()).collect(),
                values: x.column(j).iter().copied().collect(),
            })
            .collect();
        Observations {
            m: x.nrows(),
            n: x.ncols(),
            columns,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> Result<&ObservedColumn<T>> {
        self.columns.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.n,
        })
    }

    /// Total number of observed entries.
    pub fn observed_count(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    /// Fraction of entries observed.
    pub fn density(&self) -> f64 {
        if self.m == 0 || self.n == 0 {
            return 0.0;
        }
        self.observed_count() as f64 / (self.m * self.n) as f64
    }

    /// All observations as `(row, column, value)` triplets, column-major,
    /// 0-based.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.observed_count());
        for (j, column) in self.columns.iter().enumerate() {
            for (&i, &v) in column.rows.iter().zip(&column.values) {
                out.push((i, j, v));
            }
        }
        out
    }

    /// The transposed observation set, for running the same search on the
    /// row space instead of the column space.
    pub fn transposed(&self) -> Self {
        let triplets = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (j, i, v))
            .collect::<Vec<_>>();
        Observations::from_triplets(self.n, self.m, triplets)
            .expect("transposing preserves validity")
    }
}

/// Structured orthonormal basis `B_i = [x̄_{Ω,i}, e_k : k ∈ Ω_iᶜ]` whose span
/// contains every full column consistent with observed column `i`.
///
/// `xbar` is the normalized observed column embedded in ℝᵐ (zero off its
/// support); the natural-basis columns are stored implicitly through the
/// `complement` index list, so products with `B_i` cost `O(m)` per column of
/// the other operand.
#[derive(Clone, Debug)]
pub struct ColumnBasis<T: Real> {
    m: usize,
    xbar: DVector<T>,
    support: Vec<usize>,
    complement: Vec<usize>,
}

impl<T: Real> ColumnBasis<T> {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of columns of `B_i`, i.e. `1 + |Ω_iᶜ|`.
    pub fn width(&self) -> usize {
        1 + self.complement.len()
    }

    /// The normalized observed column, supported on the observed rows.
    pub fn xbar(&self) -> &DVector<T> {
        &self.xbar
    }

    /// Unobserved row indices, ascending, 0-based.
    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    /// Materializes the dense m×(1+ℓ) basis matrix. Only meant for oracle
    /// tests; the operations below never build it.
    pub fn dense(&self) -> DMatrix<T> {
        let mut b = DMatrix::zeros(self.m, self.width());
        for &row in &self.support {
            b[(row, 0)] = self.xbar[row];
        }
        for (k, &row) in self.complement.iter().enumerate() {
            b[(row, 1 + k)] = T::one();
        }
        b
    }

    /// `B_iᵀ M` assembled in `O(m · ncols)` from the structure of `B_i`.
    pub(crate) fn transpose_times(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let cols = m.ncols();
        let mut p = DMatrix::zeros(self.width(), cols);
        for &row in &self.support {
            let weight = self.xbar[row];
            for j in 0..cols {
                p[(0, j)] += weight * m[(row, j)];
            }
        }
        for (k, &row) in self.complement.iter().enumerate() {
            for j in 0..cols {
                p[(1 + k, j)] = m[(row, j)];
            }
        }
        p
    }

    /// `B_i y` embedded into ℝᵐ.
    pub(crate) fn times(&self, y: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.m);
        for &row in &self.support {
            out[row] = self.xbar[row] * y[0];
        }
        for (k, &row) in self.complement.iter().enumerate() {
            out[row] = y[1 + k];
        }
        out
    }

    /// Rows of `(I − B_iB_iᵀ)U` restricted to the observed support. The
    /// unobserved rows of that residual vanish identically, so its singular
    /// values — the sines of the principal angles between `span(U)` and
    /// `span(B_i)` — are computed from this |Ω|×r block alone.
    fn residual_support_block(&self, u: &DMatrix<T>, p: &DMatrix<T>) -> DMatrix<T> {
        let r = u.ncols();
        let mut block = DMatrix::zeros(self.support.len(), r);
        for (k, &row) in self.support.iter().enumerate() {
            let weight = self.xbar[row];
            for j in 0..r {
                block[(k, j)] = u[(row, j)] - weight * p[(0, j)];
            }
        }
        block
    }
}

/// Top singular triple of `B_iᵀU` and the derived atomic objective value.
///
/// The sign convention fixes the first entry of `right` with magnitude above
/// 1e-14 to be positive (flipping `left` along with it), so witnesses are
/// deterministic. `gap` is the distance between the two leading singular
/// values; the objective is non-smooth where it vanishes.
#[derive(Clone, Debug)]
pub struct AtomicWitness<T: Real> {
    /// `f_{G,i}(U) = 1 − λ_max² ∈ [0, 1]`.
    pub value: T,
    /// Top singular value `λ` of `B_iᵀU`, clamped into `[0, 1]`.
    pub lambda_max: T,
    /// Top left singular vector of `B_iB_iᵀU`, length m.
    pub left: DVector<T>,
    /// Top right singular vector, length r.
    pub right: DVector<T>,
    /// `λ₁ − λ₂` (or `λ₁` when only one singular value exists).
    pub gap: T,
}

/// Builds the consistency basis for column `i`, or `None` when the observed
/// column is empty or entirely zero (such columns contribute zero to both
/// objectives and to the gradient).
pub fn column_basis<T: Real>(obs: &Observations<T>, i: usize) -> Result<Option<ColumnBasis<T>>> {
    let column = obs.column(i)?;
    if column.is_zero() {
        return Ok(None);
    }
    let norm = column.norm();
    let mut xbar = DVector::zeros(obs.m());
    for (&row, &value) in column.rows().iter().zip(column.values()) {
        xbar[row] = value / norm;
    }
    let support: Vec<usize> = column.rows().to_vec();
    let mut complement = Vec::with_capacity(obs.m() - support.len());
    let mut cursor = 0;
    for row in 0..obs.m() {
        if cursor < support.len() && support[cursor] == row {
            cursor += 1;
        } else {
            complement.push(row);
        }
    }
    Ok(Some(ColumnBasis {
        m: obs.m(),
        xbar,
        support,
        complement,
    }))
}

fn check_ambient<T: Real>(u: &Frame<T>, m: usize) -> Result<()> {
    if u.m() != m {
        return Err(Error::dim(format!(
            "frame has {} rows but the problem has {}",
            u.m(),
            m
        )));
    }
    Ok(())
}

/// The atomic geometric value alone, without singular vectors.
///
/// Evaluated as the squared smallest singular value of `(I − B_iB_iᵀ)U`,
/// which equals `1 − λ_max²(B_iᵀU)` exactly but keeps full relative accuracy
/// near zero, where the difference-of-squares form loses every digit.
pub(crate) fn atomic_geometric_value<T: Real>(u: &Frame<T>, basis: &ColumnBasis<T>) -> T {
    let r = u.r();
    if basis.support.len() < r {
        // The residual has rank at most |Ω| < r, so the smallest of its r
        // singular values is exactly zero: the spans intersect.
        return T::zero();
    }
    let p = basis.transpose_times(u.matrix());
    let block = basis.residual_support_block(u.matrix(), &p);
    let sines = linalg::singular_values(&block);
    let smallest = clamp(*sines.last().expect("r ≥ 1"), T::zero(), T::one());
    smallest * smallest
}

/// Evaluates `f_{G,i}(U) = 1 − λ_max²(B_iᵀU)` together with the top singular
/// triple needed by the gradient.
pub fn atomic_geometric<T: Real>(u: &Frame<T>, basis: &ColumnBasis<T>) -> Result<AtomicWitness<T>> {
    check_ambient(u, basis.m())?;
    let value = atomic_geometric_value(u, basis);

    let p = basis.transpose_times(u.matrix());
    let dec = linalg::svd(&p);
    let lambda_max = clamp(dec.singular_values[0], T::zero(), T::one());
    let gap = if dec.singular_values.len() > 1 {
        dec.singular_values[0] - dec.singular_values[1]
    } else {
        dec.singular_values[0]
    };

    let (mut small_left, mut right): (DVector<T>, DVector<T>) =
        if dec.singular_values[0] > T::zero() {
            (dec.u.column(0).into_owned(), dec.v_t.row(0).transpose())
        } else {
            // The spans are exactly orthogonal; any unit pair witnesses the
            // (zero) top singular value. Pick natural-basis vectors.
            let mut left = DVector::zeros(basis.width());
            left[0] = T::one();
            let mut right = DVector::zeros(u.r());
            right[0] = T::one();
            (left, right)
        };
    let sign_floor = tolerances::scaled::<T>(tolerances::SIGN_CONVENTION);
    if let Some(first) = right.iter().find(|x| x.abs() > sign_floor) {
        if *first < T::zero() {
            small_left = -small_left;
            right = -right;
        }
    }
    let left = basis.times(&small_left);

    Ok(AtomicWitness {
        value,
        lambda_max,
        left,
        right,
        gap,
    })
}

/// Evaluates the masked least-squares residual
/// `f_{F,i}(U) = ‖x_{Ω,i} − P(x_{Ω,i}, U_{Ω_i})‖²`.
///
/// The projection solves the normal problem through the SVD pseudoinverse
/// with relative rank cutoff 1e-12. Empty columns contribute zero.
pub fn atomic_frobenius<T: Real>(u: &Frame<T>, obs: &Observations<T>, i: usize) -> Result<T> {
    check_ambient(u, obs.m())?;
    let residual = frobenius_residual(u, obs, i)?;
    Ok(residual.norm_squared())
}

/// The masked least-squares residual of column `i` embedded into ℝᵐ
/// (supported on the observed rows).
pub(crate) fn frobenius_residual<T: Real>(
    u: &Frame<T>,
    obs: &Observations<T>,
    i: usize,
) -> Result<DVector<T>> {
    let column = obs.column(i)?;
    let mut embedded = DVector::zeros(obs.m());
    if column.is_empty() {
        return Ok(embedded);
    }
    let masked = masked_rows(u, column.rows());
    let x = DVector::from_column_slice(column.values());
    let w = linalg::pinv_solve(
        &masked,
        &x,
        tolerances::scaled::<T>(tolerances::RANK_CUTOFF),
    );
    let residual = &x - masked * w;
    for (k, &row) in column.rows().iter().enumerate() {
        embedded[row] = residual[k];
    }
    Ok(embedded)
}

/// The |Ω|×r block of `U` at the given rows.
pub(crate) fn masked_rows<T: Real>(u: &Frame<T>, rows: &[usize]) -> DMatrix<T> {
    let r = u.r();
    DMatrix::from_fn(rows.len(), r, |k, j| u.matrix()[(rows[k], j)])
}

/// Sum of the selected atomic objective over all columns, in ascending
/// column order (the order is fixed so totals are bit-stable).
pub fn total_objective<T: Real>(u: &Frame<T>, obs: &Observations<T>, metric: Metric) -> Result<T> {
    check_ambient(u, obs.m())?;
    let mut total = T::zero();
    for i in 0..obs.n() {
        total += match metric {
            Metric::Geometric => match column_basis(obs, i)? {
                Some(basis) => atomic_geometric_value(u, &basis),
                None => T::zero(),
            },
            Metric::Frobenius => atomic_frobenius(u, obs, i)?,
        };
    }
    Ok(total)
}

/// Euclidean gradient of the atomic geometric objective:
/// `G_i = −2λ b_i v_iᵀ`.
///
/// When the top singular pair is tied (`gap ≤ 1e-12`) the first pair in the
/// decomposition's descending order is used; callers can detect the
/// subdifferential choice through the witness gap.
pub fn atomic_gradient<T: Real>(u: &Frame<T>, basis: &ColumnBasis<T>) -> Result<DMatrix<T>> {
    let witness = atomic_geometric(u, basis)?;
    Ok(gradient_from_witness(&witness))
}

fn gradient_from_witness<T: Real>(witness: &AtomicWitness<T>) -> DMatrix<T> {
    let scale = -(T::one() + T::one()) * witness.lambda_max;
    let mut g = DMatrix::zeros(witness.left.nrows(), witness.right.nrows());
    for j in 0..witness.right.nrows() {
        let w = scale * witness.right[j];
        for i in 0..witness.left.nrows() {
            g[(i, j)] = witness.left[i] * w;
        }
    }
    g
}

/// Riemannian gradient of the total geometric objective:
/// `∇_U f_G = (I − UUᵀ) Σ_i G_i`, horizontal at `U`.
pub fn riemannian_gradient<T: Real>(
    u: &Frame<T>,
    obs: &Observations<T>,
) -> Result<HorizontalTangent<T>> {
    Ok(geometric_state(u, obs)?.gradient)
}

/// Objective value and Riemannian gradient from one sweep over the columns.
pub(crate) struct GeometricState<T: Real> {
    pub objective: T,
    pub gradient: HorizontalTangent<T>,
}

pub(crate) fn geometric_state<T: Real>(
    u: &Frame<T>,
    obs: &Observations<T>,
) -> Result<GeometricState<T>> {
    check_ambient(u, obs.m())?;
    let mut total = T::zero();
    let mut sum = DMatrix::zeros(u.m(), u.r());
    for i in 0..obs.n() {
        if let Some(basis) = column_basis(obs, i)? {
            let witness = atomic_geometric(u, &basis)?;
            total += witness.value;
            sum += gradient_from_witness(&witness);
        }
    }
    // Project twice: one pass leaves a vertical residual of order
    // eps·‖ΣG_i‖, which dominates the direction when the gradient is small
    // near convergence; the second pass knocks it down to eps².
    let once = crate::grassmann::horizontal_project(u, &sum)?;
    let gradient = crate::grassmann::horizontal_project(u, once.matrix())?;
    Ok(GeometricState {
        objective: total,
        gradient,
    })
}

/// Derivative of the geometric objective along a horizontal direction:
/// `⟨∇_U f_G, H⟩ = trace(∇ᵀH)`.
pub fn directional_derivative<T: Real>(
    u: &Frame<T>,
    h: &HorizontalTangent<T>,
    obs: &Observations<T>,
) -> Result<T> {
    let residual = (u.matrix().transpose() * h.matrix()).norm();
    if residual > tolerances::scaled::<T>(tolerances::HORIZONTALITY) {
        return Err(Error::NotHorizontal {
            residual: residual.to_f64_lossy(),
        });
    }
    let gradient = riemannian_gradient(u, obs)?;
    Ok(gradient.matrix().dot(h.matrix()))
}
