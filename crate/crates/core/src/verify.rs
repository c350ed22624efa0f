//! Independent oracles and reproduction probes: finite-difference gradient
//! checks, the canonical discontinuity probe, closure sequences, assumption
//! reports, decreasing-angle path checks, and seeded Monte Carlo campaigns
//! for the two guaranteed completion scenarios.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grassmann::{
    chordal_distance, haar_sample, horizontal_project, tangent_geodesic, Frame, HorizontalTangent,
};
use crate::linalg;
use crate::objective::{atomic_geometric, column_basis, total_objective, Metric, Observations};
use crate::scalar::{clamp, Real};
use crate::solver::{
    complete_matrix, descend_from, full_sampling_svd_baseline, perturb_to_interior, SolverConfig,
    Termination,
};
use crate::synth::{generate_instance, sampling_graph_connected};

/// Campaign success threshold on the final geometric objective.
pub const CAMPAIGN_SUCCESS_TOLERANCE: f64 = 1e-10;
/// Campaign recovery threshold on the relative completion error.
pub const CAMPAIGN_RECOVERY_TOLERANCE: f64 = 1e-6;

/// Directional derivative of the geometric objective along a horizontal
/// direction, estimated by central differences along the geodesic with that
/// velocity (so both evaluation points stay on the manifold).
pub fn finite_difference_directional<T: Real>(
    u: &Frame<T>,
    h_direction: &HorizontalTangent<T>,
    obs: &Observations<T>,
    h: T,
) -> Result<T> {
    let path = tangent_geodesic(u, h_direction)?;
    let forward = total_objective(&path.frame_at(h), obs, Metric::Geometric)?;
    let backward = total_objective(&path.frame_at(-h), obs, Metric::Geometric)?;
    Ok((forward - backward) / (h + h))
}

/// Finite-difference estimate of the Riemannian gradient.
///
/// Entry (k, ℓ) is the central-difference directional derivative along the
/// horizontal projection of the coordinate direction `e_k e_ℓᵀ`; for a
/// horizontal gradient this reproduces the gradient entrywise.
pub fn finite_difference_gradient<T: Real>(
    u: &Frame<T>,
    obs: &Observations<T>,
    h: T,
) -> Result<DMatrix<T>> {
    let h_f64 = h.to_f64_lossy();
    if !(1e-8..=1e-4).contains(&h_f64) {
        return Err(Error::InvalidSpec {
            context: format!("finite-difference step {h_f64} outside [1e-8, 1e-4]"),
        });
    }
    let (m, r) = (u.m(), u.r());
    let mut estimate = DMatrix::zeros(m, r);
    for k in 0..m {
        for l in 0..r {
            let mut coordinate = DMatrix::zeros(m, r);
            coordinate[(k, l)] = T::one();
            let direction = horizontal_project(u, &coordinate)?;
            if direction.norm() <= T::from_f64_lossy(1e-14) {
                continue;
            }
            estimate[(k, l)] = finite_difference_directional(u, &direction, obs, h)?;
        }
    }
    Ok(estimate)
}

/// Whether a start frame satisfies the two analysis assumptions against a
/// known optimum.
#[derive(Clone, Debug)]
pub struct AssumptionReport<T: Real> {
    /// All principal angles between `span(U_X)` and `span(U₀)` below π/2,
    /// i.e. every singular value of `U_XᵀU₀` strictly positive.
    pub assumption_one: bool,
    pub min_cross_singular_value: T,
    /// Every per-column smallest principal angle θ_i below π/2.
    pub assumption_two: bool,
    pub max_angle: T,
    /// θ_i = arccos λ_max(B_iᵀU₀) per column; zero for empty or zero
    /// columns.
    pub per_column_angles: Vec<T>,
}

impl<T: Real> AssumptionReport<T> {
    pub fn both_hold(&self) -> bool {
        self.assumption_one && self.assumption_two
    }
}

/// Evaluates Assumptions I and II for a start frame `u0` against a global
/// optimum `u_x`.
pub fn check_assumptions<T: Real>(
    u0: &Frame<T>,
    u_x: &Frame<T>,
    obs: &Observations<T>,
) -> Result<AssumptionReport<T>> {
    if u0.m() != u_x.m() || u0.r() != u_x.r() || u0.m() != obs.m() {
        return Err(Error::dim(format!(
            "start {}×{}, optimum {}×{}, observations with m = {}",
            u0.m(),
            u0.r(),
            u_x.m(),
            u_x.r(),
            obs.m()
        )));
    }
    let cross = u_x.matrix().transpose() * u0.matrix();
    let sigma = linalg::singular_values(&cross);
    let min_cross = *sigma.last().expect("r ≥ 1");
    let assumption_one = min_cross > T::from_f64_lossy(1e-12);

    let mut per_column_angles = Vec::with_capacity(obs.n());
    let mut max_angle = T::zero();
    for i in 0..obs.n() {
        let angle = match column_basis(obs, i)? {
            Some(basis) => atomic_geometric(u0, &basis)?.lambda_max.acos(),
            None => T::zero(),
        };
        max_angle = max_angle.max(angle);
        per_column_angles.push(angle);
    }
    let assumption_two = max_angle < T::frac_pi_2() - T::from_f64_lossy(1e-12);

    Ok(AssumptionReport {
        assumption_one,
        min_cross_singular_value: min_cross,
        assumption_two,
        max_angle,
        per_column_angles,
    })
}

/// The canonical 3×1 probe instance: one column observed on rows 2 and 3
/// (1-based) with values (1, 1); the first row is hidden.
///
/// On the frame family [`example1_frame`] the residual objective jumps from
/// 0 to 2 at ε = 0 while the geometric objective is identically zero.
pub fn example1_observations<T: Real>() -> Observations<T> {
    Observations::from_triplets(3, 1, vec![(1, 0, T::one()), (2, 0, T::one())])
        .expect("static triplets are valid")
}

/// The one-parameter frame family `[√(1−2ε²), ε, ε]ᵀ`, ε ∈ [−1/√2, 1/√2].
pub fn example1_frame<T: Real>(epsilon: T) -> Result<Frame<T>> {
    check_probe_epsilon(epsilon)?;
    let radicand = (T::one() - (epsilon * epsilon + epsilon * epsilon)).max(T::zero());
    Frame::new(DMatrix::from_column_slice(
        3,
        1,
        &[radicand.sqrt(), epsilon, epsilon],
    ))
}

/// Symmetric ε grid over [−1/√2, 1/√2]; for an odd point count the middle
/// point is exactly zero.
pub fn example1_grid<T: Real>(points: usize) -> Vec<T> {
    assert!(points >= 2, "a grid needs at least two points");
    let scale = T::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2);
    let half = (points - 1) as f64 / 2.0;
    (0..points)
        .map(|k| T::from_f64_lossy((k as f64 - half) / half) * scale)
        .collect()
}

fn check_probe_epsilon<T: Real>(epsilon: T) -> Result<()> {
    let bound = T::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
    if epsilon.abs() > bound {
        return Err(Error::GridOutOfRange {
            value: epsilon.to_f64_lossy(),
        });
    }
    Ok(())
}

/// One row of the probe table.
#[derive(Clone, Copy, Debug)]
pub struct ProbeRow<T: Real> {
    pub epsilon: T,
    pub frobenius: T,
    pub geometric: T,
}

/// Tabulates both atomic objectives over the probe family.
pub fn example1_probe<T: Real>(grid: &[T]) -> Result<Vec<ProbeRow<T>>> {
    let obs = example1_observations::<T>();
    let basis = column_basis(&obs, 0)?.expect("probe column is nonzero");
    let mut rows = Vec::with_capacity(grid.len());
    for &epsilon in grid {
        let frame = example1_frame(epsilon)?;
        let frobenius = crate::objective::atomic_frobenius(&frame, &obs, 0)?;
        let geometric = atomic_geometric(&frame, &basis)?.value;
        rows.push(ProbeRow {
            epsilon,
            frobenius,
            geometric,
        });
    }
    Ok(rows)
}

/// One element of a closure sequence.
#[derive(Clone, Copy, Debug)]
pub struct ClosurePoint<T: Real> {
    /// Frobenius distance `‖U_n − U_boundary‖_F`.
    pub distance: T,
    /// Total residual objective of the perturbed frame.
    pub frobenius_value: T,
}

/// Walks the constructive sequence `U_{1/n}`, n = 1..steps, from a
/// geometrically consistent boundary frame into the residual-consistent set,
/// witnessing that the geometric solution set is the closure of the
/// residual one.
pub fn closure_sequence_check<T: Real>(
    u_boundary: &Frame<T>,
    obs: &Observations<T>,
    steps: usize,
) -> Result<Vec<ClosurePoint<T>>> {
    let mut points = Vec::with_capacity(steps);
    for n in 1..=steps {
        let epsilon = T::one() / T::from_f64_lossy(n as f64);
        let perturbed = perturb_to_interior(u_boundary, obs, epsilon)?;
        let distance = (perturbed.frame.matrix() - u_boundary.matrix()).norm();
        let frobenius_value = total_objective(&perturbed.frame, obs, Metric::Frobenius)?;
        points.push(ClosurePoint {
            distance,
            frobenius_value,
        });
    }
    Ok(points)
}

/// Monotonicity report for a normalized convex-combination path.
#[derive(Clone, Debug)]
pub struct PathMonotonicity<T: Real> {
    /// `sin²θ_i(t)` at the sampled times.
    pub sin_squared: Vec<T>,
    /// Largest increase between consecutive samples (≤ 0 when strictly
    /// monotone).
    pub max_increase: T,
    /// True when `max_increase ≤ 1e-10`.
    pub nonincreasing: bool,
    pub final_value: T,
    /// Dimension of `span(U_X) ∩ span(B_i)` found.
    pub intersection_dimension: usize,
    /// Times the random unit coefficient vector was redrawn for being
    /// orthogonal to the target direction.
    pub redraws: usize,
}

/// Checks that `sin²θ_i` is nonincreasing along the normalized path
/// `u(t) = ((1−t)u_{0,i} + t·u_{X,i}) / ‖·‖` from a random direction inside
/// `span(U₀)` to a unit vector of `span(U_X) ∩ span(B_i)`.
///
/// When the intersection has dimension above one, `u_{X,i}` is taken as the
/// direction maximizing `|⟨u_{0,i}, ·⟩|` inside the intersection.
pub fn corollary_path_check<T: Real, R: Rng + ?Sized>(
    u0: &Frame<T>,
    u_x: &Frame<T>,
    obs: &Observations<T>,
    column: usize,
    samples: usize,
    rng: &mut R,
) -> Result<PathMonotonicity<T>> {
    if samples < 2 {
        return Err(Error::InvalidSpec {
            context: "need at least two path samples".into(),
        });
    }
    let basis = column_basis(obs, column)?.ok_or(Error::EmptyIntersection { column })?;

    // Unit directions of span(U_X) inside span(B_i): right singular vectors
    // of B_iᵀU_X with singular value one.
    let p = basis.transpose_times(u_x.matrix());
    let dec = linalg::svd(&p);
    let unit_threshold = T::one() - T::from_f64_lossy(1e-8);
    let intersection_dimension = dec
        .singular_values
        .iter()
        .filter(|&&s| s >= unit_threshold)
        .count();
    if intersection_dimension == 0 {
        return Err(Error::EmptyIntersection { column });
    }
    let mut intersection = DMatrix::zeros(u_x.m(), intersection_dimension);
    for j in 0..intersection_dimension {
        let direction = u_x.matrix() * dec.v_t.row(j).transpose();
        intersection.set_column(j, &direction);
    }

    // Haar unit coefficients w, redrawn while U₀w is orthogonal to the
    // intersection.
    let mut redraws = 0;
    let (start, target) = loop {
        let w = random_unit_vector::<T, _>(u0.r(), rng);
        let start = u0.matrix() * &w;
        let coefficients = intersection.transpose() * &start;
        let overlap = coefficients.norm();
        if overlap <= T::from_f64_lossy(1e-12) {
            redraws += 1;
            continue;
        }
        let target = &intersection * (coefficients / overlap);
        break (start, target);
    };

    let mut sin_squared = Vec::with_capacity(samples);
    for s in 0..samples {
        let t = T::from_f64_lossy(s as f64 / (samples - 1) as f64);
        let mixed = &start * (T::one() - t) + &target * t;
        let unit = &mixed / mixed.norm();
        // sin²θ through the projection residual, accurate near zero.
        let through_basis = basis.transpose_times(&DMatrix::from_column_slice(
            unit.nrows(),
            1,
            unit.as_slice(),
        ));
        let projected = basis.times(&DVector::from_column_slice(through_basis.as_slice()));
        let residual = &unit - projected;
        sin_squared.push(clamp(residual.norm_squared(), T::zero(), T::one()));
    }

    let mut max_increase = T::zero();
    for w in sin_squared.windows(2) {
        max_increase = max_increase.max(w[1] - w[0]);
    }
    Ok(PathMonotonicity {
        max_increase,
        nonincreasing: max_increase <= T::from_f64_lossy(1e-10),
        final_value: *sin_squared.last().expect("samples ≥ 2"),
        sin_squared,
        intersection_dimension,
        redraws,
    })
}

fn random_unit_vector<T: Real, R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<T> {
    loop {
        let v = DVector::from_fn(len, |_, _| {
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
            T::from_f64_lossy(z)
        });
        let norm = v.norm();
        if norm > T::from_f64_lossy(1e-12) {
            return v / norm;
        }
    }
}

/// The completion scenarios a campaign can exercise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Rank-one ground truth, arbitrary sampling pattern.
    RankOneArbitrary,
    /// Arbitrary rank, every entry observed.
    FullSampling,
    /// Anything else; no convergence guarantee is claimed.
    General,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::RankOneArbitrary => "rank_one_arbitrary",
            Scenario::FullSampling => "full_sampling",
            Scenario::General => "general",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-trial bookkeeping of a campaign.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    /// RNG stream id used by this trial (derived from the campaign seed).
    pub stream: u64,
    pub status: Termination,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_gradient_norm: f64,
    /// `f_G ≤ 1e-10` at termination.
    pub success: bool,
    /// Whether the nonzero sampling graph is connected (rank-one scenario
    /// only).
    pub connected: Option<bool>,
    pub completion_relative_error: Option<f64>,
    /// Chordal distance of the final frame to the SVD column space
    /// (full-sampling scenario only).
    pub subspace_distance: Option<f64>,
    /// Completion matched the ground truth to the recovery tolerance (only
    /// counted where the solution is known unique).
    pub recovered: bool,
    /// Haar starts discarded for violating the analysis assumptions.
    pub assumption_redraws: usize,
    /// Objective trace nonincreasing.
    pub monotone: bool,
    /// Strict decrease across every step with gradient above tolerance.
    pub strict_decrease: bool,
}

/// Aggregate statistics of a Monte Carlo campaign.
#[derive(Clone, Debug)]
pub struct CampaignStats {
    pub scenario: Scenario,
    pub trials: usize,
    /// Trials reaching `f_G ≤ 1e-10`.
    pub successes: usize,
    /// Trials whose completion matched a known-unique ground truth to
    /// relative error 1e-6.
    pub recovery_successes: usize,
    pub mean_iterations: f64,
    /// Per-trial RNG streams, for reproduction.
    pub seeds: Vec<u64>,
    /// Haar starts discarded across all trials for violating the
    /// assumptions (the probability-one claim predicts zero).
    pub assumption_discards: usize,
    pub records: Vec<TrialRecord>,
}

impl CampaignStats {
    /// True when every trial converged and every known-unique instance was
    /// recovered; scenarios without a guarantee always hold.
    pub fn guarantee_held(&self) -> bool {
        match self.scenario {
            Scenario::RankOneArbitrary => {
                self.successes == self.trials
                    && self
                        .records
                        .iter()
                        .filter(|t| t.connected == Some(true))
                        .all(|t| t.recovered)
            }
            Scenario::FullSampling => self.successes == self.trials,
            Scenario::General => true,
        }
    }
}

/// Runs `trials` independent completion experiments for a scenario, each
/// with a fresh ground truth, mask and Haar start, and reports success and
/// recovery statistics.
///
/// Per-trial RNG streams are derived from `(seed, trial index)`, so results
/// are reproducible and order-independent.
pub fn monte_carlo_guarantee(
    scenario: Scenario,
    m: usize,
    n: usize,
    r: usize,
    mask_density: f64,
    trials: usize,
    seed: u64,
) -> Result<CampaignStats> {
    match scenario {
        Scenario::RankOneArbitrary if r != 1 => {
            return Err(Error::InvalidScenarioParameters {
                context: format!("rank-one scenario requires r = 1, got {r}"),
            });
        }
        Scenario::FullSampling if mask_density != 1.0 => {
            return Err(Error::InvalidScenarioParameters {
                context: format!("full-sampling scenario requires density 1, got {mask_density}"),
            });
        }
        _ => {}
    }
    if trials == 0 {
        return Err(Error::InvalidScenarioParameters {
            context: "at least one trial is required".into(),
        });
    }

    // Stop well below the success threshold so completions carry margin,
    // but above the numerical floor of the stable objective evaluation.
    let config = SolverConfig::<f64> {
        objective_tolerance: 1e-13,
        seed,
        ..SolverConfig::default()
    };

    let mut records = Vec::with_capacity(trials);
    let mut seeds = Vec::with_capacity(trials);
    for trial in 0..trials {
        let stream = trial as u64 + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        seeds.push(stream);

        let problem = generate_instance::<f64, _>(m, n, r, mask_density, &mut rng)?;
        let obs = &problem.observations;

        let mut assumption_redraws = 0;
        let start = loop {
            let candidate = haar_sample::<f64, _>(m, r, &mut rng)?;
            let report = check_assumptions(&candidate, &problem.factor_frame, obs)?;
            if report.both_hold() || assumption_redraws >= 32 {
                break candidate;
            }
            assumption_redraws += 1;
        };

        let trial_config = SolverConfig {
            seed: stream,
            ..config.clone()
        };
        let run = descend_from(start, obs, &trial_config, &mut rng)?;
        let success = run.final_objective() <= CAMPAIGN_SUCCESS_TOLERANCE;

        let completed = complete_matrix(&run.frame, obs)?;
        let relative_error = (&completed - &problem.matrix).norm() / problem.matrix.norm();
        let mut connected = None;
        let mut subspace_distance = None;
        let recovered = match scenario {
            Scenario::RankOneArbitrary => {
                let is_connected = sampling_graph_connected(obs);
                connected = Some(is_connected);
                success && is_connected && relative_error <= CAMPAIGN_RECOVERY_TOLERANCE
            }
            Scenario::FullSampling => {
                let reference = full_sampling_svd_baseline(&problem.matrix, r)?;
                subspace_distance = Some(chordal_distance(&run.frame, &reference)?);
                success && relative_error <= CAMPAIGN_RECOVERY_TOLERANCE
            }
            Scenario::General => success && relative_error <= CAMPAIGN_RECOVERY_TOLERANCE,
        };

        records.push(TrialRecord {
            stream,
            status: run.status,
            iterations: run.iterations(),
            final_objective: run.final_objective(),
            final_gradient_norm: run.final_gradient_norm(),
            success,
            connected,
            completion_relative_error: Some(relative_error),
            subspace_distance,
            recovered,
            assumption_redraws,
            monotone: run.objective_nonincreasing(),
            strict_decrease: run.strictly_decreasing_above(trial_config.gradient_tolerance),
        });
    }

    let successes = records.iter().filter(|t| t.success).count();
    let recovery_successes = records.iter().filter(|t| t.recovered).count();
    let mean_iterations = records.iter().map(|t| t.iterations as f64).sum::<f64>() / trials as f64;
    let assumption_discards = records.iter().map(|t| t.assumption_redraws).sum();

    Ok(CampaignStats {
        scenario,
        trials,
        successes,
        recovery_successes,
        mean_iterations,
        seeds,
        assumption_discards,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_table_shows_the_dichotomy() {
        let grid = example1_grid::<f64>(9);
        assert_eq!(grid[4], 0.0);
        let rows = example1_probe(&grid).unwrap();
        for row in &rows {
            if row.epsilon == 0.0 {
                assert_eq!(row.frobenius, 2.0);
            } else {
                assert!(row.frobenius <= 1e-18, "ε = {}", row.epsilon);
            }
            assert!(row.geometric <= 1e-12, "ε = {}", row.epsilon);
        }
    }

    #[test]
    fn probe_rejects_out_of_range_epsilon() {
        assert!(matches!(
            example1_probe(&[0.8f64]),
            Err(Error::GridOutOfRange { .. })
        ));
    }

    #[test]
    fn finite_difference_step_bounds() {
        let obs = example1_observations::<f64>();
        let frame = example1_frame(0.3).unwrap();
        assert!(finite_difference_gradient(&frame, &obs, 1e-3).is_err());
        assert!(finite_difference_gradient(&frame, &obs, 1e-9).is_err());
    }

    #[test]
    fn flat_objective_has_zero_finite_difference_gradient() {
        let obs = Observations::<f64>::empty(5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frame = haar_sample::<f64, _>(5, 2, &mut rng).unwrap();
        let estimate = finite_difference_gradient(&frame, &obs, 1e-6).unwrap();
        assert!(estimate.norm() <= 1e-10);
    }

    #[test]
    fn assumptions_hold_at_the_optimum_and_fail_orthogonally() {
        let obs = example1_observations::<f64>();
        let consistent = example1_frame(0.5).unwrap();
        let report = check_assumptions(&consistent, &consistent, &obs).unwrap();
        assert!(report.assumption_one);
        assert!(report.assumption_two);

        // r = 1 with orthogonal start and optimum: assumption one fails.
        let e1 = example1_frame(0.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let orthogonal = Frame::new(DMatrix::from_column_slice(3, 1, &[0.0, s, s])).unwrap();
        let report = check_assumptions(&orthogonal, &e1, &obs).unwrap();
        assert!(!report.assumption_one);
    }

    #[test]
    fn campaign_parameter_validation() {
        assert!(matches!(
            monte_carlo_guarantee(Scenario::RankOneArbitrary, 5, 5, 2, 0.5, 2, 1),
            Err(Error::InvalidScenarioParameters { .. })
        ));
        assert!(matches!(
            monte_carlo_guarantee(Scenario::FullSampling, 5, 5, 2, 0.5, 2, 1),
            Err(Error::InvalidScenarioParameters { .. })
        ));
        assert!(matches!(
            monte_carlo_guarantee(Scenario::General, 5, 5, 2, 0.5, 0, 1),
            Err(Error::InvalidScenarioParameters { .. })
        ));
    }

    #[test]
    fn small_rank_one_campaign_converges_and_is_reproducible() {
        let a = monte_carlo_guarantee(Scenario::RankOneArbitrary, 6, 6, 1, 0.6, 3, 11).unwrap();
        let b = monte_carlo_guarantee(Scenario::RankOneArbitrary, 6, 6, 1, 0.6, 3, 11).unwrap();
        assert_eq!(a.successes, 3);
        assert!(a.guarantee_held());
        assert_eq!(a.assumption_discards, 0);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.final_objective, rb.final_objective);
            assert_eq!(ra.iterations, rb.iterations);
        }
    }
}
