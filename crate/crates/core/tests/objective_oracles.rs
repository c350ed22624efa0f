//! Independent oracles for the objective module: dense-SVD cross-checks,
//! finite-difference gradient agreement, the containment and continuity
//! properties, and exact decomposability.

use gmc_core::grassmann::{geodesic_from_tangent, haar_sample, horizontal_project, Frame};
use gmc_core::objective::{
    atomic_frobenius, atomic_geometric, atomic_gradient, column_basis, directional_derivative,
    riemannian_gradient, total_objective, Metric, Observations,
};
use gmc_core::verify::{
    example1_frame, example1_observations, finite_difference_directional,
    finite_difference_gradient,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_matrix(m: usize, n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

/// Random single-column observation set with at least one nonzero value.
fn random_column(m: usize, rng: &mut impl Rng) -> Observations<f64> {
    loop {
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..m {
            if rng.random::<f64>() < 0.6 {
                triplets.push((i, 0, StandardNormal.sample(rng)));
            }
        }
        if triplets.iter().any(|&(_, _, v)| v != 0.0) {
            return Observations::from_triplets(m, 1, triplets).unwrap();
        }
    }
}

fn random_masked(x: &DMatrix<f64>, density: f64, rng: &mut impl Rng) -> Observations<f64> {
    let triplets: Vec<(usize, usize, f64)> = (0..x.nrows())
        .flat_map(|i| (0..x.ncols()).map(move |j| (i, j)))
        .filter(|_| rng.random::<f64>() < density)
        .map(|(i, j)| (i, j, x[(i, j)]))
        .collect();
    Observations::from_triplets(x.nrows(), x.ncols(), triplets).unwrap()
}

#[test]
fn dense_svd_oracle_for_the_atomic_geometric_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for _ in 0..20 {
        let u: Frame<f64> = haar_sample(6, 2, &mut rng).unwrap();
        let obs = random_column(6, &mut rng);
        let basis = column_basis(&obs, 0).unwrap().unwrap();
        let witness = atomic_geometric(&u, &basis).unwrap();

        // Oracle: materialize B_i densely and take the top eigenvalue of the
        // Gram matrix of B_iᵀU (an independent decomposition route).
        let dense = basis.dense();
        let product = dense.transpose() * u.matrix();
        let gram = product.transpose() * &product;
        let lambda = nalgebra::SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x))
            .sqrt()
            .clamp(0.0, 1.0);

        assert!((witness.lambda_max - lambda).abs() <= 1e-12);
        assert!((witness.value - (1.0 - lambda * lambda)).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&witness.value));
        assert!((witness.left.norm() - 1.0).abs() <= 1e-10);
        assert!((witness.right.norm() - 1.0).abs() <= 1e-10);
        if let Some(first) = witness.right.iter().find(|x| x.abs() > 1e-14) {
            assert!(*first > 0.0, "sign convention");
        }
    }
}

#[test]
fn atomic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-6;
    let mut checked = 0;
    for _ in 0..20 {
        let u: Frame<f64> = haar_sample(7, 2, &mut rng).unwrap();
        let obs = random_column(7, &mut rng);
        let basis = column_basis(&obs, 0).unwrap().unwrap();
        let witness = atomic_geometric(&u, &basis).unwrap();
        if witness.gap <= 1e-6 {
            continue;
        }
        let euclidean = atomic_gradient(&u, &basis).unwrap();
        for _ in 0..20 {
            let direction = horizontal_project(&u, &gaussian_matrix(7, 2, &mut rng)).unwrap();
            let analytic = euclidean.dot(direction.matrix());
            let estimate = finite_difference_directional(&u, &direction, &obs, h).unwrap();
            let denominator = analytic.abs().max(estimate.abs()).max(1e-4);
            assert!(
                (analytic - estimate).abs() / denominator <= 1e-5,
                "analytic {analytic}, fd {estimate}"
            );
            checked += 1;
        }
    }
    assert!(checked >= 200, "too many tie exclusions: {checked}");
}

#[test]
fn riemannian_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let x = gaussian_matrix(10, 8, &mut rng);
    let obs = random_masked(&x, 0.4, &mut rng);
    let u: Frame<f64> = haar_sample(10, 3, &mut rng).unwrap();
    let gradient = riemannian_gradient(&u, &obs).unwrap();
    let h = 1e-6;
    for _ in 0..20 {
        let direction = horizontal_project(&u, &gaussian_matrix(10, 3, &mut rng)).unwrap();
        let analytic = directional_derivative(&u, &direction, &obs).unwrap();
        let estimate = finite_difference_directional(&u, &direction, &obs, h).unwrap();
        let denominator = analytic
            .abs()
            .max(estimate.abs())
            .max(1e-4 * gradient.norm() * direction.norm());
        assert!(
            (analytic - estimate).abs() / denominator <= 1e-5,
            "analytic {analytic}, fd {estimate}"
        );
    }
}

#[test]
fn full_finite_difference_matrix_agrees_with_the_gradient() {
    // Rank-one 6×4 instance, smooth witnesses only.
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    let problem: gmc_core::synth::GeneratedProblem<f64> =
        gmc_core::synth::generate_instance(6, 4, 1, 0.7, &mut rng).unwrap();
    let obs = &problem.observations;
    let u: Frame<f64> = haar_sample(6, 2, &mut rng).unwrap();
    for i in 0..obs.n() {
        if let Some(basis) = column_basis(obs, i).unwrap() {
            assert!(atomic_geometric(&u, &basis).unwrap().gap > 1e-6);
        }
    }
    let gradient = riemannian_gradient(&u, obs).unwrap();
    let coarse = finite_difference_gradient(&u, obs, 1e-5).unwrap();
    let fine = finite_difference_gradient(&u, obs, 1e-6).unwrap();
    assert!(
        (&fine - gradient.matrix()).norm() / gradient.norm() <= 1e-5,
        "fd vs analytic: {}",
        (&fine - gradient.matrix()).norm() / gradient.norm()
    );
    // Self-consistency of the oracle across a 10× step change.
    assert!((&fine - &coarse).norm() / gradient.norm() <= 1e-3);
}

#[test]
fn probe_family_gradient_is_zero_where_analysis_says_so() {
    // Along the probe family the geometric atomic is identically zero, so
    // both the analytic Riemannian gradient and the finite-difference
    // estimate must vanish; the analytic one-dimensional derivative of
    // 1 − λ²(ε) is zero because λ ≡ 1.
    let obs = example1_observations::<f64>();
    let u = example1_frame(0.3).unwrap();
    let gradient = riemannian_gradient(&u, &obs).unwrap();
    assert!(gradient.norm() <= 1e-8, "‖∇‖ = {}", gradient.norm());
    let estimate = finite_difference_gradient(&u, &obs, 1e-6).unwrap();
    assert!(estimate.norm() <= 1e-8, "‖fd‖ = {}", estimate.norm());
}

#[test]
fn residual_consistency_implies_geometric_consistency() {
    // Containment: wherever the masked residual vanishes, the geometric
    // atomic vanishes too.
    let mut rng = ChaCha8Rng::seed_from_u64(205);
    for _ in 0..200 {
        let m = rng.random_range(4..=8);
        let r = rng.random_range(1..=3.min(m - 1));
        let u: Frame<f64> = haar_sample(m, r, &mut rng).unwrap();
        let w = gaussian_matrix(r, 1, &mut rng);
        let column = u.matrix() * w;
        let triplets: Vec<(usize, usize, f64)> = (0..m)
            .filter(|_| rng.random::<f64>() < 0.7)
            .map(|i| (i, 0, column[(i, 0)]))
            .collect();
        if triplets.is_empty() {
            continue;
        }
        let obs = Observations::from_triplets(m, 1, triplets).unwrap();
        let residual = atomic_frobenius(&u, &obs, 0).unwrap();
        assert!(residual <= 1e-18, "constructed instance: f_F = {residual}");
        if let Some(basis) = column_basis(&obs, 0).unwrap() {
            let value = atomic_geometric(&u, &basis).unwrap().value;
            assert!(value <= 1e-10, "f_G = {value} with f_F = {residual}");
        }
    }
}

#[test]
fn top_singular_value_is_lipschitz_in_the_frame() {
    // |λ_max(B_iᵀU) − λ_max(B_iᵀU′)| ≤ ‖U − U′‖_F: the testable form of the
    // continuity of the geometric objective.
    let mut rng = ChaCha8Rng::seed_from_u64(206);
    for _ in 0..50 {
        let u: Frame<f64> = haar_sample(8, 2, &mut rng).unwrap();
        let obs = random_column(8, &mut rng);
        let basis = column_basis(&obs, 0).unwrap().unwrap();
        let h = horizontal_project(&u, &gaussian_matrix(8, 2, &mut rng)).unwrap();
        let scale = 0.005 / h.norm();
        let nearby = geodesic_from_tangent(&u, &h, scale).unwrap();
        let delta = (u.matrix() - nearby.matrix()).norm();
        assert!(delta <= 0.01);
        let a = atomic_geometric(&u, &basis).unwrap().lambda_max;
        let b = atomic_geometric(&nearby, &basis).unwrap().lambda_max;
        assert!((a - b).abs() <= delta + 1e-14);
    }
}

#[test]
fn totals_decompose_exactly_into_atomics() {
    let mut rng = ChaCha8Rng::seed_from_u64(207);
    let x = gaussian_matrix(9, 6, &mut rng);
    let obs = random_masked(&x, 0.5, &mut rng);
    let u: Frame<f64> = haar_sample(9, 3, &mut rng).unwrap();

    let mut geometric_sum = 0.0;
    let mut frobenius_sum = 0.0;
    for i in 0..obs.n() {
        if let Some(basis) = column_basis(&obs, i).unwrap() {
            geometric_sum += atomic_geometric(&u, &basis).unwrap().value;
        }
        frobenius_sum += atomic_frobenius(&u, &obs, i).unwrap();
    }
    assert_eq!(
        total_objective(&u, &obs, Metric::Geometric).unwrap(),
        geometric_sum
    );
    assert_eq!(
        total_objective(&u, &obs, Metric::Frobenius).unwrap(),
        frobenius_sum
    );
}

#[test]
fn total_geometric_objective_depends_only_on_the_span() {
    let mut rng = ChaCha8Rng::seed_from_u64(208);
    let x = gaussian_matrix(8, 5, &mut rng);
    let obs = random_masked(&x, 0.5, &mut rng);
    let u: Frame<f64> = haar_sample(8, 3, &mut rng).unwrap();
    let q = gmc_core::grassmann::orthonormalize(&gaussian_matrix(3, 3, &mut rng)).unwrap();
    let rotated = u.rotated(q.matrix()).unwrap();
    let a = total_objective(&u, &obs, Metric::Geometric).unwrap();
    let b = total_objective(&rotated, &obs, Metric::Geometric).unwrap();
    assert!((a - b).abs() <= 1e-10);
}

#[test]
fn fully_observed_factored_matrix_scores_zero_on_both_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(209);
    let u: Frame<f64> = haar_sample(10, 3, &mut rng).unwrap();
    let w = gaussian_matrix(6, 3, &mut rng);
    let x = u.matrix() * w.transpose();
    let obs = Observations::from_dense(&x);
    assert!(total_objective(&u, &obs, Metric::Geometric).unwrap() <= 1e-18);
    assert!(total_objective(&u, &obs, Metric::Frobenius).unwrap() <= 1e-18);
    // At a consistent frame the Riemannian gradient vanishes.
    let gradient = riemannian_gradient(&u, &obs).unwrap();
    assert!(gradient.norm() <= 1e-10, "‖∇‖ = {:e}", gradient.norm());
}
