//! Grassmann manifold geometry.
//!
//! A point of the Grassmann manifold — an `r`-dimensional subspace of ℝᵐ —
//! is represented by a [`Frame`], an m×r matrix with orthonormal columns.
//! Two frames generate the same point exactly when they differ by a right
//! orthogonal factor.
//!
//! This module provides the geometric toolkit the rest of the crate builds
//! on: principal angles and the chordal distance between subspaces, closed
//! form geodesics (both from an initial velocity and connecting a pair of
//! subspaces), horizontal projection of ambient matrices, and sampling from
//! the rotation-invariant (Haar) distribution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{clamp, Real};
use crate::tolerances;

/// An m×r matrix with orthonormal columns; a generator of a point on the
/// Grassmann manifold.
///
/// Invariants: `1 ≤ r ≤ m` and `‖UᵀU − I_r‖_F ≤ 1e-10`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> Frame<T> {
    /// Wraps a matrix that is already orthonormal, validating the invariant.
    pub fn new(entries: DMatrix<T>) -> Result<Self> {
        let (m, r) = (entries.nrows(), entries.ncols());
        if r == 0 || r > m {
            return Err(Error::InvalidDimension { m, r });
        }
        let frame = Frame { entries };
        let residual = frame.orthonormality_residual();
        if residual > tolerances::scaled::<T>(tolerances::ORTHONORMALITY) {
            return Err(Error::dim(format!(
                "matrix is not orthonormal: ‖UᵀU − I‖_F = {:.3e}",
                residual.to_f64_lossy()
            )));
        }
        Ok(frame)
    }

    /// Wraps a matrix known to be orthonormal by construction.
    pub(crate) fn from_orthonormal(entries: DMatrix<T>) -> Self {
        debug_assert!(
            Frame::new(entries.clone()).is_ok(),
            "constructed frame violates orthonormality"
        );
        Frame { entries }
    }

    /// Ambient dimension m.
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Subspace dimension r.
    pub fn r(&self) -> usize {
        self.entries.ncols()
    }

    /// The generator matrix.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.entries
    }

    /// `‖UᵀU − I_r‖_F`.
    pub fn orthonormality_residual(&self) -> T {
        let gram = self.entries.transpose() * &self.entries;
        let identity = DMatrix::<T>::identity(self.r(), self.r());
        (gram - identity).norm()
    }

    /// Right-multiplies the generator by an orthogonal factor, yielding a
    /// different generator of the same subspace.
    pub fn rotated(&self, q: &DMatrix<T>) -> Result<Self> {
        if q.nrows() != self.r() || q.ncols() != self.r() {
            return Err(Error::dim(format!(
                "rotation factor must be {r}×{r}, got {}×{}",
                q.nrows(),
                q.ncols(),
                r = self.r()
            )));
        }
        Frame::new(&self.entries * q)
    }
}

/// A horizontal tangent vector at a frame: an m×r matrix `H` with `UᵀH = 0`.
///
/// Horizontal vectors at `U` represent tangent vectors to the Grassmann
/// manifold at `span(U)`.
#[derive(Clone, Debug)]
pub struct HorizontalTangent<T: Real> {
    base: Frame<T>,
    entries: DMatrix<T>,
}

impl<T: Real> HorizontalTangent<T> {
    pub(crate) fn from_parts(base: Frame<T>, entries: DMatrix<T>) -> Self {
        HorizontalTangent { base, entries }
    }

    pub fn base(&self) -> &Frame<T> {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.entries
    }

    /// Frobenius norm `‖H‖_F`; the speed of the geodesic it generates.
    pub fn norm(&self) -> T {
        self.entries.norm()
    }

    /// `‖UᵀH‖_F`, zero for an exactly horizontal vector.
    pub fn horizontality_residual(&self) -> T {
        (self.base.matrix().transpose() * &self.entries).norm()
    }

    /// The tangent scaled by `factor` (still horizontal at the same base).
    pub fn scaled(&self, factor: T) -> Self {
        HorizontalTangent {
            base: self.base.clone(),
            entries: &self.entries * factor,
        }
    }

    /// Largest singular value of `H`; the fastest principal rotation rate
    /// along the geodesic it generates.
    pub fn top_singular_value(&self) -> T {
        linalg::singular_values(&self.entries)
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }
}

/// Principal angles between two subspaces together with their cosines.
///
/// `angles` is ascending in `[0, π/2]`; `cosines[k] = cos(angles[k])` are the
/// singular values of `U₁ᵀU₂` clamped into `[0, 1]`, in descending order.
#[derive(Clone, Debug)]
pub struct AngleSpectrum<T: Real> {
    pub angles: Vec<T>,
    pub cosines: Vec<T>,
}

/// A parameterized geodesic `t ↦ span(U(t))` in factored form:
///
/// ```text
/// U(t) = base_rotated · diag(cos(α_i t)) · right_factor
///      + directions  · diag(sin(α_i t)) · right_factor
/// ```
///
/// Nonzero columns of `directions` are unit vectors orthogonal to every
/// column of `base_rotated`; a zero column marks a direction that does not
/// rotate (`α_i = 0`).
///
/// For a geodesic connecting two subspaces the `angles` are the principal
/// angles between them, in `[0, π/2]`. For a geodesic launched from a
/// tangent vector they are the singular values of the velocity and may be
/// larger.
#[derive(Clone, Debug)]
pub struct GeodesicPath<T: Real> {
    base_rotated: Frame<T>,
    directions: DMatrix<T>,
    angles: Vec<T>,
    right_factor: DMatrix<T>,
}

impl<T: Real> GeodesicPath<T> {
    /// Generator of `span(U(0))`.
    pub fn base_rotated(&self) -> &Frame<T> {
        &self.base_rotated
    }

    /// Rotation directions, one column per principal angle.
    pub fn directions(&self) -> &DMatrix<T> {
        &self.directions
    }

    /// Rotation rates `α_i` (radians per unit of `t`).
    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    /// The r×r orthogonal factor applied on the right.
    pub fn right_factor(&self) -> &DMatrix<T> {
        &self.right_factor
    }

    /// Evaluates the geodesic, returning a valid frame for every `t`.
    pub fn frame_at(&self, t: T) -> Frame<T> {
        let r = self.base_rotated.r();
        let mut mixed = DMatrix::zeros(self.base_rotated.m(), r);
        for i in 0..r {
            let angle = self.angles[i] * t;
            let (sin, cos) = angle.sin_cos();
            let base_col = self.base_rotated.matrix().column(i);
            let dir_col = self.directions.column(i);
            for k in 0..mixed.nrows() {
                mixed[(k, i)] = base_col[k] * cos + dir_col[k] * sin;
            }
        }
        Frame::from_orthonormal(mixed * &self.right_factor)
    }

    /// Velocity `U̇(t)`, horizontal at `frame_at(t)`.
    pub fn velocity_at(&self, t: T) -> DMatrix<T> {
        let r = self.base_rotated.r();
        let mut mixed = DMatrix::zeros(self.base_rotated.m(), r);
        for i in 0..r {
            let rate = self.angles[i];
            let angle = rate * t;
            let (sin, cos) = angle.sin_cos();
            let base_col = self.base_rotated.matrix().column(i);
            let dir_col = self.directions.column(i);
            for k in 0..mixed.nrows() {
                mixed[(k, i)] = (dir_col[k] * cos - base_col[k] * sin) * rate;
            }
        }
        mixed * &self.right_factor
    }

    /// The initial velocity as a horizontal tangent at `frame_at(0)`.
    pub fn initial_velocity(&self) -> HorizontalTangent<T> {
        HorizontalTangent::from_parts(self.frame_at(T::zero()), self.velocity_at(T::zero()))
    }
}

/// Orthonormalizes the columns of `a` into a frame spanning the same space.
///
/// Uses thin QR with the diagonal of the triangular factor made positive, so
/// the result is deterministic for a given input. Fails with
/// [`Error::RankDeficient`] when `σ_min ≤ 1e-12 · σ_max`.
pub fn orthonormalize<T: Real>(a: &DMatrix<T>) -> Result<Frame<T>> {
    let (m, r) = (a.nrows(), a.ncols());
    if r == 0 || r > m {
        return Err(Error::InvalidDimension { m, r });
    }
    let sigma = linalg::singular_values(a);
    let top = sigma[0];
    let bottom = sigma[r - 1];
    let threshold = tolerances::scaled::<T>(tolerances::RANK_CUTOFF) * top;
    if !bottom.is_finite() || bottom <= threshold {
        return Err(Error::RankDeficient {
            ratio: if top > T::zero() {
                (bottom / top).to_f64_lossy()
            } else {
                0.0
            },
        });
    }

    let qr = a.clone().qr();
    let mut q = qr.q();
    let rfac = qr.r();
    for j in 0..r {
        if rfac[(j, j)] < T::zero() {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(Frame::from_orthonormal(q))
}

/// Draws a frame from the rotation-invariant (Haar) distribution on the set
/// of m×r orthonormal matrices.
///
/// Realized by orthonormalizing an m×r matrix of independent standard normal
/// entries; deterministic for a fixed generator state.
pub fn haar_sample<T: Real, R: Rng + ?Sized>(m: usize, r: usize, rng: &mut R) -> Result<Frame<T>> {
    if r == 0 || r > m {
        return Err(Error::InvalidDimension { m, r });
    }
    loop {
        let gauss = DMatrix::from_fn(m, r, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            T::from_f64_lossy(z)
        });
        // A Gaussian matrix is rank-deficient with probability zero; redraw
        // on the measure-zero event so callers always get a frame.
        match orthonormalize(&gauss) {
            Ok(frame) => return Ok(frame),
            Err(Error::RankDeficient { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
}

/// Principal angles between `span(U₁)` and `span(U₂)`.
///
/// The cosines are the singular values of `U₁ᵀU₂`, clamped into `[0, 1]`
/// before `arccos`; the `min(r₁, r₂)` leading pairs are returned, angles
/// ascending.
pub fn principal_angles<T: Real>(u1: &Frame<T>, u2: &Frame<T>) -> Result<AngleSpectrum<T>> {
    if u1.m() != u2.m() {
        return Err(Error::dim(format!(
            "ambient dimensions differ: {} vs {}",
            u1.m(),
            u2.m()
        )));
    }
    let product = u1.matrix().transpose() * u2.matrix();
    let sigma = linalg::singular_values(&product);
    let p = u1.r().min(u2.r());
    let cosines: Vec<T> = sigma
        .into_iter()
        .take(p)
        .map(|s| clamp(s, T::zero(), T::one()))
        .collect();
    let angles = cosines.iter().map(|&c| c.acos()).collect();
    Ok(AngleSpectrum { angles, cosines })
}

/// Chordal distance `√(Σ sin²α_k)` between `span(U₁)` and `span(U₂)`.
///
/// Computed from the singular values of the residual `(I − P₂)U₁` (with the
/// smaller frame projected onto the larger), which are exactly the sines of
/// the principal angles. This form stays accurate when the subspaces nearly
/// coincide, where `√(1 − cos²)` loses every significant digit.
pub fn chordal_distance<T: Real>(u1: &Frame<T>, u2: &Frame<T>) -> Result<T> {
    if u1.m() != u2.m() {
        return Err(Error::dim(format!(
            "ambient dimensions differ: {} vs {}",
            u1.m(),
            u2.m()
        )));
    }
    let (small, large) = if u1.r() <= u2.r() { (u1, u2) } else { (u2, u1) };
    let coefficients = large.matrix().transpose() * small.matrix();
    let residual = small.matrix() - large.matrix() * coefficients;
    let sines = linalg::singular_values(&residual);
    let sum = sines
        .iter()
        .map(|&s| {
            let s = clamp(s, T::zero(), T::one());
            s * s
        })
        .fold(T::zero(), |acc, x| acc + x);
    Ok(sum.sqrt())
}

/// Projects an ambient m×r matrix onto the horizontal space at `U`:
/// `H = (I − UUᵀ)M`.
pub fn horizontal_project<T: Real>(u: &Frame<T>, m: &DMatrix<T>) -> Result<HorizontalTangent<T>> {
    if m.nrows() != u.m() || m.ncols() != u.r() {
        return Err(Error::dim(format!(
            "expected {}×{} matrix, got {}×{}",
            u.m(),
            u.r(),
            m.nrows(),
            m.ncols()
        )));
    }
    let coefficients = u.matrix().transpose() * m;
    let entries = m - u.matrix() * coefficients;
    Ok(HorizontalTangent::from_parts(u.clone(), entries))
}

/// Geodesic launched from `span(U)` with initial velocity `H`, in factored
/// form.
///
/// With the compact SVD `H = U_H S_H V_Hᵀ`,
///
/// ```text
/// U(t) = [U V_H, U_H] [cos(S_H t); sin(S_H t)] V_Hᵀ
/// ```
///
/// is the unique geodesic through `span(U)` with velocity `H` at `t = 0`.
pub fn tangent_geodesic<T: Real>(
    u: &Frame<T>,
    h: &HorizontalTangent<T>,
) -> Result<GeodesicPath<T>> {
    if h.matrix().nrows() != u.m() || h.matrix().ncols() != u.r() {
        return Err(Error::dim(format!(
            "tangent shape {}×{} does not match frame {}×{}",
            h.matrix().nrows(),
            h.matrix().ncols(),
            u.m(),
            u.r()
        )));
    }
    let residual = (u.matrix().transpose() * h.matrix()).norm();
    if residual > tolerances::scaled::<T>(tolerances::HORIZONTALITY) {
        return Err(Error::NotHorizontal {
            residual: residual.to_f64_lossy(),
        });
    }
    let dec = linalg::svd(h.matrix());
    let base_rotated = Frame::from_orthonormal(u.matrix() * dec.v_t.transpose());
    // Zero out direction columns with zero rotation rate: they never enter
    // the evaluation and the invariant wants them exactly zero.
    let mut directions = dec.u;
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s == T::zero() {
            for k in 0..directions.nrows() {
                directions[(k, i)] = T::zero();
            }
        }
    }
    reproject_directions(&base_rotated, &mut directions);
    Ok(GeodesicPath {
        base_rotated,
        directions,
        angles: dec.singular_values,
        right_factor: dec.v_t,
    })
}

/// Evaluates the geodesic starting at `span(U)` with velocity `H` at `t`.
pub fn geodesic_from_tangent<T: Real>(
    u: &Frame<T>,
    h: &HorizontalTangent<T>,
    t: T,
) -> Result<Frame<T>> {
    Ok(tangent_geodesic(u, h)?.frame_at(t))
}

/// The geodesic from `span(U₁)` to `span(U₂)`, reached at `t = 1`.
///
/// With the SVD `U₁ᵀU₂ = V₁ Λ V₂ᵀ`, `λ_i = cos α_i`, and the rotated
/// generators `Ū₁ = U₁V₁`, `Ū₂ = U₂V₂`, the rotation direction for each
/// open principal angle is
///
/// ```text
/// g_i = (Ū₂,:i − λ_i Ū₁,:i) / ‖Ū₂,:i − λ_i Ū₁,:i‖,
/// ```
///
/// and `g_i = 0` where `λ_i = 1` (the denominator `√(1−λ_i²)` underflows
/// past `1 − λ_i ≤ 1e-12`, so such angles are treated as exactly closed).
pub fn connecting_geodesic<T: Real>(u1: &Frame<T>, u2: &Frame<T>) -> Result<GeodesicPath<T>> {
    if u1.m() != u2.m() || u1.r() != u2.r() {
        return Err(Error::dim(format!(
            "frames must share dimensions: {}×{} vs {}×{}",
            u1.m(),
            u1.r(),
            u2.m(),
            u2.r()
        )));
    }
    let r = u1.r();
    let dec = linalg::svd(&(u1.matrix().transpose() * u2.matrix()));
    let v1 = dec.u;
    let v2 = dec.v_t.transpose();
    let base_rotated = Frame::from_orthonormal(u1.matrix() * &v1);
    let target_rotated = u2.matrix() * &v2;

    let unit_threshold = T::one() - tolerances::scaled::<T>(tolerances::UNIT_COSINE);
    let mut directions = DMatrix::zeros(u1.m(), r);
    let mut angles = Vec::with_capacity(r);
    for i in 0..r {
        let lambda = clamp(dec.singular_values[i], T::zero(), T::one());
        if lambda >= unit_threshold {
            angles.push(T::zero());
            continue;
        }
        angles.push(lambda.acos());
        let mut g: DVector<T> = target_rotated.column(i).into_owned();
        g.axpy(
            -lambda,
            &base_rotated.matrix().column(i).into_owned(),
            T::one(),
        );
        let norm = g.norm();
        for k in 0..u1.m() {
            directions[(k, i)] = g[k] / norm;
        }
    }
    reproject_directions(&base_rotated, &mut directions);
    Ok(GeodesicPath {
        base_rotated,
        directions,
        angles,
        right_factor: v1.transpose(),
    })
}

/// Removes the residual component of each nonzero direction column inside
/// `span(base)` and renormalizes.
///
/// The directions are orthogonal to the base analytically, but when they
/// come from normalizing a small vector (a weak gradient, a nearly closed
/// principal angle) the rounding residual gets amplified by the
/// normalization, and geodesic evaluation would drift off the manifold by
/// that amount.
fn reproject_directions<T: Real>(base: &Frame<T>, directions: &mut DMatrix<T>) {
    let overlap = base.matrix().transpose() * &*directions;
    let correction = base.matrix() * overlap;
    *directions -= correction;
    for i in 0..directions.ncols() {
        let norm = directions.column(i).norm();
        if norm > T::from_f64_lossy(0.5) {
            for k in 0..directions.nrows() {
                directions[(k, i)] /= norm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame64(m: usize, r: usize, data: &[f64]) -> Frame<f64> {
        Frame::new(DMatrix::from_column_slice(m, r, data)).unwrap()
    }

    #[test]
    fn orthonormalize_preserves_span_of_a_frame() {
        let u = frame64(3, 1, &[1.0, 0.0, 0.0]);
        let again = orthonormalize(u.matrix()).unwrap();
        assert_eq!(chordal_distance(&u, &again).unwrap(), 0.0);
    }

    #[test]
    fn orthonormalize_axis_aligned_scaling() {
        let a = DMatrix::from_column_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
        let frame = orthonormalize(&a).unwrap();
        let target = frame64(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(chordal_distance(&frame, &target).unwrap() <= 1e-12);
    }

    #[test]
    fn orthonormalize_random_matrix_spans_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(10, 3, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let frame = orthonormalize(&a).unwrap();
        assert!(frame.orthonormality_residual() <= 1e-12);
        let coefficients = frame.matrix().transpose() * &a;
        let residual = &a - frame.matrix() * coefficients;
        assert!(residual.norm() <= 1e-10);
    }

    #[test]
    fn orthonormalize_rejects_rank_deficiency() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        assert!(matches!(
            orthonormalize(&a),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn haar_sample_is_seed_deterministic() {
        let a: Frame<f64> = haar_sample(5, 2, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b: Frame<f64> = haar_sample(5, 2, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(a.orthonormality_residual() <= 1e-12);
    }

    #[test]
    fn haar_sample_rejects_bad_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            haar_sample::<f64, _>(3, 4, &mut rng),
            Err(Error::InvalidDimension { .. })
        ));
        assert!(matches!(
            haar_sample::<f64, _>(3, 0, &mut rng),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn principal_angles_identity_and_orthogonal_axes() {
        let e1 = frame64(3, 1, &[1.0, 0.0, 0.0]);
        let e2 = frame64(3, 1, &[0.0, 1.0, 0.0]);
        let same = principal_angles(&e1, &e1).unwrap();
        assert!(same.angles[0] <= 1e-7);
        let crossed = principal_angles(&e1, &e2).unwrap();
        assert_relative_eq!(
            crossed.angles[0],
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn principal_angles_hand_computed_spectrum() {
        // span(e1, e2) vs span(e1, (e2+e3)/√2): U₁ᵀU₂ = diag(1, 1/√2).
        let u1 = frame64(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u2 = frame64(3, 2, &[1.0, 0.0, 0.0, 0.0, s, s]);
        let spectrum = principal_angles(&u1, &u2).unwrap();
        assert!(spectrum.angles[0] <= 1e-8);
        assert_relative_eq!(
            spectrum.angles[1],
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-12
        );
        for (angle, cosine) in spectrum.angles.iter().zip(&spectrum.cosines) {
            assert_relative_eq!(angle.cos(), *cosine, epsilon = 1e-12);
        }
    }

    #[test]
    fn chordal_distance_examples() {
        let e1 = frame64(3, 1, &[1.0, 0.0, 0.0]);
        let e2 = frame64(3, 1, &[0.0, 1.0, 0.0]);
        assert_eq!(chordal_distance(&e1, &e1).unwrap(), 0.0);
        assert_relative_eq!(chordal_distance(&e1, &e2).unwrap(), 1.0, epsilon = 1e-12);

        let u1 = frame64(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u2 = frame64(3, 2, &[1.0, 0.0, 0.0, 0.0, s, s]);
        assert_relative_eq!(chordal_distance(&u1, &u2).unwrap(), s, epsilon = 1e-12);
    }

    #[test]
    fn chordal_distance_dimension_mismatch() {
        let a = frame64(3, 1, &[1.0, 0.0, 0.0]);
        let b = frame64(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            chordal_distance(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn horizontal_project_kills_in_span_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Frame<f64> = haar_sample(6, 2, &mut rng).unwrap();
        let h = horizontal_project(&u, u.matrix()).unwrap();
        assert!(h.norm() <= 1e-12);
    }

    #[test]
    fn horizontal_project_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u: Frame<f64> = haar_sample(6, 2, &mut rng).unwrap();
        let m = DMatrix::from_fn(6, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let once = horizontal_project(&u, &m).unwrap();
        assert!(once.horizontality_residual() <= 1e-12);
        let twice = horizontal_project(&u, once.matrix()).unwrap();
        assert!((twice.matrix() - once.matrix()).norm() <= 1e-12);
    }

    #[test]
    fn zero_velocity_geodesic_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Frame<f64> = haar_sample(5, 2, &mut rng).unwrap();
        let zero = horizontal_project(&u, &DMatrix::zeros(5, 2)).unwrap();
        for &t in &[0.0, 0.3, 1.0, 2.5] {
            let moved = geodesic_from_tangent(&u, &zero, t).unwrap();
            assert!(chordal_distance(&u, &moved).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn planar_rotation_geodesic() {
        // m=2, r=1: u = e1, H = (π/2)·e2 rotates onto e2 at t = 1.
        let u = frame64(2, 1, &[1.0, 0.0]);
        let h = horizontal_project(
            &u,
            &DMatrix::from_column_slice(2, 1, &[0.0, std::f64::consts::FRAC_PI_2]),
        )
        .unwrap();
        let e2 = frame64(2, 1, &[0.0, 1.0]);
        let diagonal = frame64(
            2,
            1,
            &[
                std::f64::consts::FRAC_1_SQRT_2,
                std::f64::consts::FRAC_1_SQRT_2,
            ],
        );
        let at_one = geodesic_from_tangent(&u, &h, 1.0).unwrap();
        let at_half = geodesic_from_tangent(&u, &h, 0.5).unwrap();
        assert!(chordal_distance(&at_one, &e2).unwrap() <= 1e-12);
        assert!(chordal_distance(&at_half, &diagonal).unwrap() <= 1e-12);
    }

    #[test]
    fn geodesic_frames_stay_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Frame<f64> = haar_sample(8, 3, &mut rng).unwrap();
        let raw = DMatrix::from_fn(8, 3, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let h = horizontal_project(&u, &raw).unwrap();
        let path = tangent_geodesic(&u, &h).unwrap();
        for k in 1..=10 {
            let t = k as f64 / 10.0;
            let frame = path.frame_at(t);
            assert!(frame.orthonormality_residual() <= 1e-10, "t = {t}");
        }
    }

    #[test]
    fn tangent_geodesic_rejects_vertical_vectors() {
        let u = frame64(3, 1, &[1.0, 0.0, 0.0]);
        let vertical = HorizontalTangent::from_parts(
            u.clone(),
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        );
        assert!(matches!(
            tangent_geodesic(&u, &vertical),
            Err(Error::NotHorizontal { .. })
        ));
    }

    #[test]
    fn connecting_geodesic_coincident_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Frame<f64> = haar_sample(6, 2, &mut rng).unwrap();
        let path = connecting_geodesic(&u, &u).unwrap();
        assert!(path.angles().iter().all(|&a| a == 0.0));
        assert_eq!(path.directions(), &DMatrix::zeros(6, 2));
        assert!(chordal_distance(&path.frame_at(0.7), &u).unwrap() <= 1e-12);
    }

    #[test]
    fn connecting_geodesic_axis_midpoint() {
        let e1 = frame64(3, 1, &[1.0, 0.0, 0.0]);
        let e2 = frame64(3, 1, &[0.0, 1.0, 0.0]);
        let path = connecting_geodesic(&e1, &e2).unwrap();
        let mid = path.frame_at(0.5);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = frame64(3, 1, &[s, s, 0.0]);
        assert!(chordal_distance(&mid, &expected).unwrap() <= 1e-12);
    }

    #[test]
    fn connecting_geodesic_reaches_endpoint_with_horizontal_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u1: Frame<f64> = haar_sample(10, 3, &mut rng).unwrap();
        let u2: Frame<f64> = haar_sample(10, 3, &mut rng).unwrap();
        let path = connecting_geodesic(&u1, &u2).unwrap();
        assert!(chordal_distance(&path.frame_at(0.0), &u1).unwrap() <= 1e-8);
        assert!(chordal_distance(&path.frame_at(1.0), &u2).unwrap() <= 1e-8);
        let velocity = path.velocity_at(0.0);
        assert!((u1.matrix().transpose() * velocity).norm() <= 1e-8);
    }
}
