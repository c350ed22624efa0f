//! Small dense decompositions shared across the crate.
//!
//! The singular value decomposition here is a one-sided Jacobi (Hestenes)
//! iteration rather than the backend's bidiagonalization. Masked frames
//! routinely produce matrices with repeated singular values (removing k rows
//! from an orthonormal frame leaves the Gram spectrum `{1, …, 1, …}`), a
//! degenerate configuration on which the backend's Golub–Kahan SVD has been
//! observed to return non-orthogonal factors with O(1e-2) reconstruction
//! error. Jacobi is unconditionally convergent, deterministic, computes
//! small singular values to high relative accuracy (which the objective
//! evaluation depends on), and stays generic over the scalar type.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{machine_epsilon, Real};

/// Thin SVD `M = U diag(σ) Vᵀ` with σ sorted descending.
///
/// `u` is m×k and `v_t` is k×n with `k = min(m, n)`; both factors have
/// orthonormal rows/columns even when `M` is rank-deficient (null directions
/// are completed from the natural basis).
pub(crate) struct Svd<T: Real> {
    pub u: DMatrix<T>,
    pub singular_values: Vec<T>,
    pub v_t: DMatrix<T>,
}

/// One sweep of Hestenes rotations over all column pairs of `w`, applied
/// identically to the accumulator `v` when present. Returns true when every
/// pair was already orthogonal to working precision.
fn jacobi_sweep<T: Real>(w: &mut DMatrix<T>, mut v: Option<&mut DMatrix<T>>) -> bool {
    let n = w.ncols();
    let m = w.nrows();
    let eps = machine_epsilon::<T>();
    let mut converged = true;
    for p in 0..n {
        for q in (p + 1)..n {
            let mut alpha = T::zero();
            let mut beta = T::zero();
            let mut gamma = T::zero();
            for k in 0..m {
                let wp = w[(k, p)];
                let wq = w[(k, q)];
                alpha += wp * wp;
                beta += wq * wq;
                gamma += wp * wq;
            }
            if alpha == T::zero() || beta == T::zero() {
                continue;
            }
            if gamma.abs() <= eps * (alpha * beta).sqrt() {
                continue;
            }
            converged = false;
            let zeta = (beta - alpha) / (gamma + gamma);
            let t = if zeta >= T::zero() {
                T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
            } else {
                -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
            };
            let c = T::one() / (T::one() + t * t).sqrt();
            let s = c * t;
            for k in 0..m {
                let wp = w[(k, p)];
                let wq = w[(k, q)];
                w[(k, p)] = c * wp - s * wq;
                w[(k, q)] = s * wp + c * wq;
            }
            if let Some(v) = v.as_deref_mut() {
                for k in 0..v.nrows() {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
    }
    converged
}

const MAX_SWEEPS: usize = 64;

/// Jacobi SVD of a tall (m ≥ n) matrix; `v` comes out as the full n×n
/// orthogonal right factor.
fn svd_tall<T: Real>(a: &DMatrix<T>) -> Svd<T> {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        if jacobi_sweep(&mut w, Some(&mut v)) {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<T> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).expect("finite norms"));

    let mut u = DMatrix::zeros(a.nrows(), n);
    let mut v_t = DMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut incomplete = Vec::new();
    for (i, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        singular_values.push(sigma);
        if sigma > T::zero() {
            for k in 0..a.nrows() {
                u[(k, i)] = w[(k, j)] / sigma;
            }
        } else {
            incomplete.push(i);
        }
        for k in 0..n {
            v_t[(i, k)] = v[(k, j)];
        }
    }
    complete_null_columns(&mut u, &incomplete);
    Svd {
        u,
        singular_values,
        v_t,
    }
}

/// Fills the listed columns with unit vectors orthogonal to every other
/// column, so the factor stays orthonormal for rank-deficient input.
fn complete_null_columns<T: Real>(u: &mut DMatrix<T>, incomplete: &[usize]) {
    let (m, n) = (u.nrows(), u.ncols());
    let half = T::from_f64_lossy(0.5);
    for &column in incomplete {
        let mut best: Option<(T, DVector<T>)> = None;
        for candidate in 0..m {
            let mut vector = DVector::zeros(m);
            vector[candidate] = T::one();
            // Two orthogonalization passes keep the completion orthogonal
            // to working precision.
            for _ in 0..2 {
                for j in 0..n {
                    if j == column {
                        continue;
                    }
                    let overlap = u.column(j).dot(&vector);
                    for k in 0..m {
                        vector[k] -= overlap * u[(k, j)];
                    }
                }
            }
            let norm = vector.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, vector));
            }
            if norm > half {
                break;
            }
        }
        let (norm, vector) = best.expect("ambient dimension is positive");
        for k in 0..m {
            u[(k, column)] = vector[k] / norm;
        }
    }
}

pub(crate) fn svd<T: Real>(m: &DMatrix<T>) -> Svd<T> {
    if m.nrows() >= m.ncols() {
        svd_tall(m)
    } else {
        let flipped = svd_tall(&m.transpose());
        Svd {
            u: flipped.v_t.transpose(),
            singular_values: flipped.singular_values,
            v_t: flipped.u.transpose(),
        }
    }
}

/// Singular values of `M`, sorted descending.
pub(crate) fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let mut w = if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        m.transpose()
    };
    for _ in 0..MAX_SWEEPS {
        if jacobi_sweep(&mut w, None) {
            break;
        }
    }
    let mut sigma: Vec<T> = (0..w.ncols()).map(|j| w.column(j).norm()).collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).expect("finite norms"));
    sigma
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending
/// with matching eigenvector columns.
pub(crate) fn symmetric_eigen_sorted<T: Real>(m: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let eig = nalgebra::SymmetricEigen::new(m);
    let values: Vec<T> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("finite eigenvalues")
    });
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    (order.iter().map(|&k| values[k]).collect(), vectors)
}

/// Minimum-norm least-squares solution of `A w ≈ b` through the SVD
/// pseudoinverse, discarding singular values below `cutoff · σ_max`.
pub(crate) fn pinv_solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>, cutoff: T) -> DVector<T> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let dec = svd(a);
    let mut w = DVector::zeros(a.ncols());
    let top = dec.singular_values.first().copied().unwrap_or_else(T::zero);
    let threshold = cutoff * top;
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s > threshold && s > T::zero() {
            let coefficient = (dec.u.column(k).dot(b)) / s;
            for j in 0..a.ncols() {
                w[j] += dec.v_t[(k, j)] * coefficient;
            }
        }
    }
    w
}
