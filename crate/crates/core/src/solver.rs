//! Randomized geodesic gradient descent for the geometric objective, matrix
//! completion from a found column space, the two guaranteed baselines, and
//! the boundary-to-interior perturbation.
//!
//! One descent step from the iterate `U`:
//!
//! 1. compute the Riemannian gradient and set `H = −∇_U f_G`;
//! 2. follow the geodesic with initial velocity `H`;
//! 3. locate the first stationary time `t*` (where `d/dt f_G = 0` with the
//!    derivative negative before it);
//! 4. step to `U(t)` with `t` drawn uniformly from `(0, t*)` (or `t = t*`
//!    in deterministic mode).
//!
//! The objective therefore decreases strictly at every accepted step. A
//! rounding-level safeguard re-tries `t = t*` and then stops if no measured
//! decrease is possible, so recorded traces are monotone unconditionally.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grassmann::{chordal_distance, haar_sample, tangent_geodesic, Frame, HorizontalTangent};
use crate::linalg;
use crate::objective::{
    self, column_basis, frobenius_residual, geometric_state, total_objective, Metric, Observations,
};
use crate::scalar::Real;
use crate::tolerances;

/// Step selection rule for the accepted point along each descent geodesic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// `t ~ Uniform(0, t*)`; the randomized rule.
    Randomized,
    /// `t = t*`, the first stationary point itself.
    Deterministic,
}

/// Line search controls.
#[derive(Clone, Debug)]
pub struct LineSearchParams<T: Real> {
    /// Initial forward-scan step Δt; `None` selects `0.1 / σ_max(H)`.
    pub scan_step: Option<T>,
    /// The bisection stops once `|d/dt f_G| ≤` this.
    pub bisection_tolerance: T,
    /// Maximum number of forward scan steps before giving up and returning
    /// the half-period cap with `bracketed = false`.
    pub max_brackets: usize,
}

impl<T: Real> Default for LineSearchParams<T> {
    fn default() -> Self {
        LineSearchParams {
            scan_step: None,
            bisection_tolerance: T::from_f64_lossy(1e-10),
            max_brackets: 200,
        }
    }
}

/// Solver configuration.
#[derive(Clone, Debug)]
pub struct SolverConfig<T: Real> {
    pub max_iterations: usize,
    /// Stop once `f_G ≤` this.
    pub objective_tolerance: T,
    /// Stop once `‖∇f_G‖_F ≤` this.
    pub gradient_tolerance: T,
    pub step_mode: StepMode,
    pub line_search: LineSearchParams<T>,
    /// Seed for the Haar start and the randomized steps.
    pub seed: u64,
    /// Extra Haar restarts attempted when a run fails to reach the
    /// objective tolerance; the best run is returned.
    pub restarts: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 10_000,
            objective_tolerance: T::from_f64_lossy(1e-12),
            gradient_tolerance: T::from_f64_lossy(1e-10),
            step_mode: StepMode::Randomized,
            line_search: LineSearchParams::default(),
            seed: 0,
            restarts: 0,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidSpec {
                context: "max_iterations must be at least 1".into(),
            });
        }
        let positive = |x: T| x.is_finite() && x > T::zero();
        if !positive(self.objective_tolerance)
            || !positive(self.gradient_tolerance)
            || !positive(self.line_search.bisection_tolerance)
        {
            return Err(Error::InvalidSpec {
                context: "tolerances must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Why a descent run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Final `f_G` is at or below the objective tolerance.
    ConvergedObjective,
    /// Gradient norm fell to or below the gradient tolerance with the
    /// objective still above its tolerance (a stationary point).
    ConvergedGradient,
    /// Iteration budget exhausted, or no numerically measurable decrease
    /// remained along the descent geodesic.
    MaxIterations,
}

/// One row of the descent trace.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord<T: Real> {
    pub iteration: usize,
    pub objective: T,
    pub gradient_norm: T,
    /// Step taken from this iterate; `None` on the final record.
    pub step: Option<T>,
}

/// Outcome of a descent run.
#[derive(Clone, Debug)]
pub struct SolverResult<T: Real> {
    pub frame: Frame<T>,
    pub trace: Vec<IterationRecord<T>>,
    pub status: Termination,
    pub seed: u64,
}

impl<T: Real> SolverResult<T> {
    pub fn final_objective(&self) -> T {
        self.trace.last().expect("trace is never empty").objective
    }

    pub fn final_gradient_norm(&self) -> T {
        self.trace
            .last()
            .expect("trace is never empty")
            .gradient_norm
    }

    /// Number of descent steps taken.
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    /// True when the recorded objective values never increase.
    pub fn objective_nonincreasing(&self) -> bool {
        self.trace
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective)
    }

    /// True when the objective strictly decreases across every step whose
    /// starting gradient norm exceeds `gradient_tolerance`.
    pub fn strictly_decreasing_above(&self, gradient_tolerance: T) -> bool {
        self.trace
            .windows(2)
            .all(|w| w[0].gradient_norm <= gradient_tolerance || w[1].objective < w[0].objective)
    }
}

/// First stationary time of `f_G` along a descent geodesic.
#[derive(Clone, Copy, Debug)]
pub struct StationaryStep<T: Real> {
    pub t_star: T,
    /// False when no derivative sign change was found within the scan
    /// budget and the half-period cap was returned instead.
    pub bracketed: bool,
}

struct GeodesicProbe<'a, T: Real> {
    path: crate::grassmann::GeodesicPath<T>,
    obs: &'a Observations<T>,
}

impl<'a, T: Real> GeodesicProbe<'a, T> {
    fn objective(&self, t: T) -> Result<T> {
        total_objective(&self.path.frame_at(t), self.obs, Metric::Geometric)
    }

    /// `d/dt f_G(U(t))`: the gradient at `U(t)` paired with the geodesic
    /// velocity there.
    fn derivative(&self, t: T) -> Result<T> {
        let frame = self.path.frame_at(t);
        let velocity = self.path.velocity_at(t);
        let state = geometric_state(&frame, self.obs)?;
        Ok(state.gradient.matrix().dot(&velocity))
    }
}

/// Finds the first stationary time `t*` of the geometric objective along the
/// geodesic with initial velocity `H`.
///
/// Scans forward in steps of Δt until the derivative changes sign or the
/// objective rises, then bisects the derivative down to the configured
/// tolerance. The scan never passes `π / (2 σ_max(H))`: past the half period
/// of the fastest principal rotation the geodesic starts to wrap.
pub fn line_search_first_stationary<T: Real>(
    u: &Frame<T>,
    h: &HorizontalTangent<T>,
    obs: &Observations<T>,
    config: &SolverConfig<T>,
) -> Result<StationaryStep<T>> {
    if h.norm() <= config.gradient_tolerance {
        return Err(Error::NotDescent { derivative: 0.0 });
    }
    let d0 = objective::directional_derivative(u, h, obs)?;
    if d0 >= T::zero() {
        return Err(Error::NotDescent {
            derivative: d0.to_f64_lossy(),
        });
    }

    let speed = h.top_singular_value();
    let cap = T::frac_pi_2() / speed;
    let step = config
        .line_search
        .scan_step
        .unwrap_or_else(|| T::from_f64_lossy(0.1) / speed)
        .min(cap);
    let probe = GeodesicProbe {
        path: tangent_geodesic(u, h)?,
        obs,
    };

    let mut t_lo = T::zero();
    let mut f_lo = probe.objective(T::zero())?;
    let mut bracket_hi = None;
    for k in 1..=config.line_search.max_brackets {
        let t = (step * T::from_f64_lossy(k as f64)).min(cap);
        let d = probe.derivative(t)?;
        let f = probe.objective(t)?;
        if d >= T::zero() || f > f_lo {
            bracket_hi = Some(t);
            break;
        }
        t_lo = t;
        f_lo = f;
        if t >= cap {
            return Ok(StationaryStep {
                t_star: cap,
                bracketed: false,
            });
        }
    }
    let Some(mut t_hi) = bracket_hi else {
        return Ok(StationaryStep {
            t_star: cap,
            bracketed: false,
        });
    };

    // Near convergence the whole derivative scale falls below any fixed
    // absolute tolerance; tightening the target relative to |d(0)| keeps
    // the stationary point localized (and still satisfies the absolute
    // contract).
    let tolerance = config
        .line_search
        .bisection_tolerance
        .min(T::from_f64_lossy(1e-3) * d0.abs());
    let width_floor = T::from_f64_lossy(1e-15) * cap;
    let mut mid = (t_lo + t_hi) * T::from_f64_lossy(0.5);
    for _ in 0..90 {
        mid = (t_lo + t_hi) * T::from_f64_lossy(0.5);
        let d = probe.derivative(mid)?;
        if d.abs() <= tolerance || t_hi - t_lo <= width_floor {
            break;
        }
        if d >= T::zero() {
            t_hi = mid;
        } else {
            let f = probe.objective(mid)?;
            if f > f_lo {
                // The derivative crossed zero and came back inside
                // (t_lo, mid); keep the left half.
                t_hi = mid;
            } else {
                t_lo = mid;
                f_lo = f;
            }
        }
    }
    Ok(StationaryStep {
        t_star: mid,
        bracketed: true,
    })
}

fn draw_open_unit<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return T::from_f64_lossy(u);
        }
    }
}

/// Runs the descent from a caller-supplied start frame, drawing randomized
/// steps from `rng`.
pub fn descend_from<T: Real, R: Rng + ?Sized>(
    start: Frame<T>,
    obs: &Observations<T>,
    config: &SolverConfig<T>,
    rng: &mut R,
) -> Result<SolverResult<T>> {
    config.validate()?;
    let mut u = start;
    let mut trace: Vec<IterationRecord<T>> = Vec::new();
    let mut iteration = 0;

    let status = loop {
        let state = geometric_state(&u, obs)?;
        let objective = state.objective;
        let gradient_norm = state.gradient.norm();
        let mut record = IterationRecord {
            iteration,
            objective,
            gradient_norm,
            step: None,
        };

        if objective <= config.objective_tolerance {
            trace.push(record);
            break Termination::ConvergedObjective;
        }
        if gradient_norm <= config.gradient_tolerance {
            trace.push(record);
            break Termination::ConvergedGradient;
        }
        if iteration >= config.max_iterations {
            trace.push(record);
            break Termination::MaxIterations;
        }

        let direction = state.gradient.scaled(-T::one());
        let stationary = line_search_first_stationary(&u, &direction, obs, config)?;
        let path = tangent_geodesic(&u, &direction)?;

        let drawn = match config.step_mode {
            StepMode::Randomized => draw_open_unit::<T, _>(rng) * stationary.t_star,
            StepMode::Deterministic => stationary.t_star,
        };
        let mut accepted = None;
        for &candidate in [drawn, stationary.t_star].iter() {
            let frame = path.frame_at(candidate);
            let f_new = total_objective(&frame, obs, Metric::Geometric)?;
            if f_new < objective {
                accepted = Some((candidate, frame));
                break;
            }
        }
        match accepted {
            Some((t, frame)) => {
                record.step = Some(t);
                trace.push(record);
                // Re-orthonormalize so rounding in the geodesic evaluation
                // cannot accumulate across iterations; the span is
                // unchanged.
                u = crate::grassmann::orthonormalize(frame.matrix())?;
                iteration += 1;
            }
            None => {
                // No measurable decrease along the whole geodesic: the
                // iterate sits at the numerical floor of the objective.
                trace.push(record);
                break Termination::MaxIterations;
            }
        }
    };

    Ok(SolverResult {
        frame: u,
        trace,
        status,
        seed: config.seed,
    })
}

/// The randomized geodesic descent: Haar start drawn from `config.seed`,
/// then descent steps until one of the three termination conditions.
///
/// With `config.restarts > 0`, failed runs are retried from fresh Haar draws
/// and the run with the smallest final objective is returned.
pub fn geodesic_descent<T: Real>(
    obs: &Observations<T>,
    r: usize,
    config: &SolverConfig<T>,
) -> Result<SolverResult<T>> {
    if r == 0 || r > obs.m() {
        return Err(Error::InvalidRank { r, m: obs.m() });
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<SolverResult<T>> = None;
    for _ in 0..=config.restarts {
        let start = haar_sample(obs.m(), r, &mut rng)?;
        let run = descend_from(start, obs, config, &mut rng)?;
        let done = run.status == Termination::ConvergedObjective;
        let better = match &best {
            None => true,
            Some(current) => run.final_objective() < current.final_objective(),
        };
        if better {
            best = Some(run);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one run"))
}

/// Completes the matrix from a column space: per column,
/// `w_i = (U_{Ω_i})† x_{Ω,i}` and `X′_{:,i} = U w_i`. Empty columns get the
/// minimum-norm completion, zero. The result always has rank at most r.
pub fn complete_matrix<T: Real>(u: &Frame<T>, obs: &Observations<T>) -> Result<DMatrix<T>> {
    if u.m() != obs.m() {
        return Err(Error::dim(format!(
            "frame has {} rows but the problem has {}",
            u.m(),
            obs.m()
        )));
    }
    let mut completed = DMatrix::zeros(obs.m(), obs.n());
    let cutoff = tolerances::scaled::<T>(tolerances::RANK_CUTOFF);
    for j in 0..obs.n() {
        let column = obs.column(j)?;
        if column.is_empty() {
            continue;
        }
        let masked = objective::masked_rows(u, column.rows());
        let x = DVector::from_column_slice(column.values());
        let w = linalg::pinv_solve(&masked, &x, cutoff);
        let full = u.matrix() * w;
        completed.set_column(j, &full);
    }
    Ok(completed)
}

/// Rank-one completion by ratio propagation.
///
/// Writes `X′ = u vᵀ` and propagates the constraints `u_i v_j = x_{ij}`
/// over the bipartite row–column graph of nonzero observed entries by
/// breadth-first search; each connected component gets an arbitrary scale
/// (root row set to one). Observed zeros are enforced afterwards as
/// structural zeros. Returns the normalized column factor and the
/// completion.
pub fn rank_one_ratio_baseline<T: Real>(obs: &Observations<T>) -> Result<(Frame<T>, DMatrix<T>)> {
    let (m, n) = (obs.m(), obs.n());
    let mut row_adjacency: Vec<Vec<(usize, T)>> = vec![Vec::new(); m];
    let mut col_adjacency: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let mut zeros: Vec<(usize, usize)> = Vec::new();
    for (i, j, value) in obs.triplets() {
        if value == T::zero() {
            zeros.push((i, j));
        } else {
            row_adjacency[i].push((j, value));
            col_adjacency[j].push((i, value));
        }
    }
    if row_adjacency.iter().all(|adj| adj.is_empty()) {
        return Err(Error::InvalidSpec {
            context: "rank-one baseline needs at least one nonzero observed entry".into(),
        });
    }

    let mut row_factor: Vec<Option<T>> = vec![None; m];
    let mut col_factor: Vec<Option<T>> = vec![None; n];
    #[derive(Clone, Copy)]
    enum Node {
        Row(usize),
        Col(usize),
    }
    let mut queue = std::collections::VecDeque::new();
    for root in 0..m {
        if row_factor[root].is_some() || row_adjacency[root].is_empty() {
            continue;
        }
        row_factor[root] = Some(T::one());
        queue.push_back(Node::Row(root));
        while let Some(node) = queue.pop_front() {
            match node {
                Node::Row(i) => {
                    let ui = row_factor[i].expect("queued rows are assigned");
                    for &(j, x) in &row_adjacency[i] {
                        if col_factor[j].is_none() {
                            col_factor[j] = Some(x / ui);
                            queue.push_back(Node::Col(j));
                        }
                    }
                }
                Node::Col(j) => {
                    let vj = col_factor[j].expect("queued columns are assigned");
                    for &(i, x) in &col_adjacency[j] {
                        if row_factor[i].is_none() {
                            row_factor[i] = Some(x / vj);
                            queue.push_back(Node::Row(i));
                        }
                    }
                }
            }
        }
    }

    // Cycle consistency: every nonzero observation must match the product.
    let tolerance = T::from_f64_lossy(1e-8);
    for i in 0..m {
        for &(j, x) in &row_adjacency[i] {
            let u = row_factor[i].expect("adjacent to a nonzero entry");
            let v = col_factor[j].expect("adjacent to a nonzero entry");
            let relative = (u * v - x).abs() / x.abs();
            if relative > tolerance {
                return Err(Error::Inconsistent {
                    row: i + 1,
                    col: j + 1,
                    relative: relative.to_f64_lossy(),
                });
            }
        }
    }

    // Structural zeros: u_i v_j = 0 must hold for every observed zero.
    for &(i, j) in &zeros {
        match (row_factor[i], col_factor[j]) {
            (Some(u), Some(v)) => {
                if u != T::zero() && v != T::zero() {
                    return Err(Error::ZeroPattern {
                        row: i + 1,
                        col: j + 1,
                    });
                }
            }
            (Some(_), None) => col_factor[j] = Some(T::zero()),
            (None, Some(_)) => row_factor[i] = Some(T::zero()),
            (None, None) => {}
        }
    }

    let u = DVector::from_iterator(m, row_factor.iter().map(|f| f.unwrap_or_else(T::zero)));
    let v = DVector::from_iterator(n, col_factor.iter().map(|f| f.unwrap_or_else(T::zero)));
    let completion = &u * v.transpose();
    let norm = u.norm();
    let frame = Frame::new(DMatrix::from_column_slice(m, 1, (&u / norm).as_slice()))?;
    Ok((frame, completion))
}

/// Column space of a fully observed matrix: the r leading left singular
/// vectors. Fails when the numerical rank is below r
/// (`σ_r ≤ 1e-12 · σ_1`).
pub fn full_sampling_svd_baseline<T: Real>(x: &DMatrix<T>, r: usize) -> Result<Frame<T>> {
    if r == 0 || r > x.nrows() {
        return Err(Error::InvalidDimension { m: x.nrows(), r });
    }
    let dec = linalg::svd(x);
    if r > dec.singular_values.len() {
        return Err(Error::RankTooLow { r, ratio: 0.0 });
    }
    let top = dec.singular_values[0];
    let ratio = if top > T::zero() {
        dec.singular_values[r - 1] / top
    } else {
        T::zero()
    };
    if !ratio.is_finite() || ratio <= tolerances::scaled::<T>(tolerances::RANK_CUTOFF) {
        return Err(Error::RankTooLow {
            r,
            ratio: ratio.to_f64_lossy(),
        });
    }
    Frame::new(dec.u.columns(0, r).into_owned())
}

/// A geometrically consistent frame nudged into the interior of the
/// residual-consistent set.
#[derive(Clone, Debug)]
pub struct PerturbedFrame<T: Real> {
    pub frame: Frame<T>,
    /// Chordal distance from the input frame; O(ε).
    pub chordal_distance: T,
    /// Columns whose residual was repaired.
    pub perturbed_columns: Vec<usize>,
}

/// Moves a frame from the boundary of the residual-consistent set into its
/// interior.
///
/// For each column whose masked residual `x_r = x_Ω − P(x_Ω, U_Ω)` is
/// nonzero, the singular-vector generator of `span(U)` against `B_i` has its
/// leading column `u₁` replaced by `(u₁ + ε x̂_r)/√(1+ε²)` with `x̂_r` the
/// unit residual (which is orthogonal to every column, so orthonormality is
/// exact for any residual magnitude), then the generator is rotated back so
/// the output converges to the input frame entrywise as ε → 0.
///
/// Requires the input to be geometrically consistent (`f_G ≤ 1e-10`).
/// Frames already representable on every observed column are returned
/// unchanged.
pub fn perturb_to_interior<T: Real>(
    u_hat: &Frame<T>,
    obs: &Observations<T>,
    epsilon: T,
) -> Result<PerturbedFrame<T>> {
    if !epsilon.is_finite() || epsilon <= T::zero() {
        return Err(Error::InvalidSpec {
            context: "perturbation scale must be positive".into(),
        });
    }
    let membership = total_objective(u_hat, obs, Metric::Geometric)?;
    if membership > tolerances::scaled_sq::<T>(tolerances::GEOMETRIC_MEMBERSHIP) {
        return Err(Error::NotInSolutionSet {
            objective: membership.to_f64_lossy(),
        });
    }

    let residual_floor = tolerances::scaled_sq::<T>(tolerances::FROBENIUS_MEMBERSHIP);
    let normalizer = (T::one() + epsilon * epsilon).sqrt();
    let mut current = u_hat.clone();
    let mut perturbed_columns = Vec::new();
    for i in 0..obs.n() {
        let Some(basis) = column_basis(obs, i)? else {
            continue;
        };
        let residual = frobenius_residual(&current, obs, i)?;
        let residual_norm_sq = residual.norm_squared();
        if residual_norm_sq <= residual_floor {
            continue;
        }
        let unit_residual = &residual / residual_norm_sq.sqrt();

        // Singular-vector generator of span(U) against span(B_i): the
        // eigenvectors of (B_iᵀU)ᵀ(B_iᵀU) ordered by decreasing eigenvalue.
        let p = basis.transpose_times(current.matrix());
        let gram = p.transpose() * &p;
        let (_, rotation) = linalg::symmetric_eigen_sorted(gram);
        let aligned = current.matrix() * &rotation;

        let mut mixed = aligned.clone();
        for k in 0..mixed.nrows() {
            mixed[(k, 0)] = (aligned[(k, 0)] + epsilon * unit_residual[k]) / normalizer;
        }
        current = Frame::new(mixed * rotation.transpose())?;
        perturbed_columns.push(i);
    }

    let distance = chordal_distance(&current, u_hat)?;
    Ok(PerturbedFrame {
        frame: current,
        chordal_distance: distance,
        perturbed_columns,
    })
}
