//! Command-line front end: problem generation, solving, evaluation,
//! discontinuity probes, contour grids, gradient verification, and Monte
//! Carlo campaigns over stable file formats.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 non-convergence (or a
//! failed guarantee / verification).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gmc_core::grassmann::{haar_sample, horizontal_project, Frame};
use gmc_core::objective::{
    atomic_frobenius, atomic_geometric, column_basis, directional_derivative, total_objective,
    Metric,
};
use gmc_core::solver::{complete_matrix, geodesic_descent, StepMode, Termination};
use gmc_core::synth::generate_instance;
use gmc_core::verify::{
    example1_grid, example1_probe, finite_difference_directional, monte_carlo_guarantee,
    CampaignStats, Scenario,
};
use gmc_core::{io, SolverConfig, SolverResult};

const EXIT_OK: i32 = 0;
const EXIT_INPUT: i32 = 1;
const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Parser)]
#[command(
    name = "gmc",
    version,
    about = "Low-rank matrix completion by column-space search on the Grassmann manifold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StepModeArg {
    Randomized,
    Deterministic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioArg {
    /// Rank-one ground truth, arbitrary sampling.
    RankOne,
    /// Arbitrary rank, every entry observed.
    FullSampling,
    /// No guarantee; statistics only.
    General,
}

impl From<ScenarioArg> for Scenario {
    fn from(value: ScenarioArg) -> Self {
        match value {
            ScenarioArg::RankOne => Scenario::RankOneArbitrary,
            ScenarioArg::FullSampling => Scenario::FullSampling,
            ScenarioArg::General => Scenario::General,
        }
    }
}

#[derive(Parser, Debug)]
struct SolverFlags {
    /// Seed for the Haar start and randomized steps.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop once f_G falls to this.
    #[arg(long = "tol-objective", default_value_t = 1e-12)]
    tol_objective: f64,
    /// Stop once the gradient norm falls to this.
    #[arg(long = "tol-gradient", default_value_t = 1e-10)]
    tol_gradient: f64,
    #[arg(long = "max-iters", default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long = "step-mode", value_enum, default_value_t = StepModeArg::Randomized)]
    step_mode: StepModeArg,
    /// Extra Haar restarts when a run stalls above the tolerance.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iters,
            objective_tolerance: self.tol_objective,
            gradient_tolerance: self.tol_gradient,
            step_mode: match self.step_mode {
                StepModeArg::Randomized => StepMode::Randomized,
                StepModeArg::Deterministic => StepMode::Deterministic,
            },
            seed: self.seed,
            restarts: self.restarts,
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic rank-r problem and write the observation and
    /// ground-truth files.
    Generate {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        rank: usize,
        /// Fraction of entries revealed, in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Observation file to write.
        #[arg(long)]
        output: PathBuf,
        /// Ground-truth matrix file to write.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Search for a consistent column space and complete the matrix.
    Complete {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        rank: usize,
        #[command(flatten)]
        solver: SolverFlags,
        /// Where to write the completed matrix.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Where to write the JSON run report (also printed to stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Ground-truth matrix for the completion error.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Nudge a geometrically consistent final frame into the interior
        /// of the residual-consistent set with this mixing scale before
        /// completing (kept only if it reduces the residual objective).
        #[arg(long)]
        perturb: Option<f64>,
    },
    /// Check a completed matrix against observations (and optionally the
    /// ground truth).
    Evaluate {
        #[arg(long)]
        observations: PathBuf,
        /// Completed matrix file.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate both atomic objectives over the canonical 3×1 probe family.
    #[command(name = "probe-example1")]
    ProbeExample1 {
        #[arg(long = "grid-points", default_value_t = 101)]
        grid_points: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate both objectives of a 3×1 column over the (u₂,u₃) disk.
    Contour {
        /// Grid resolution per axis (≥ 16; odd values include the origin).
        #[arg(long, default_value_t = 65)]
        resolution: usize,
        /// Single-column observation file with m = 3 (default: the probe
        /// column, rows 2 and 3 observed as 1).
        #[arg(long)]
        observations: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the analytic gradient against finite differences on random
    /// instances.
    #[command(name = "verify-grad")]
    VerifyGrad {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        cols: usize,
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Central-difference step (within [1e-8, 1e-4]).
        #[arg(long = "step-h", default_value_t = 1e-5)]
        step_h: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a Monte Carlo completion campaign.
    Campaign {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 15)]
        rows: usize,
        #[arg(long, default_value_t = 15)]
        cols: usize,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ProblemInfo {
    m: usize,
    n: usize,
    r: usize,
    mask_density: f64,
    seed: u64,
}

#[derive(Serialize)]
struct ConfigInfo {
    max_iterations: usize,
    tol_objective: f64,
    tol_gradient: f64,
    step_mode: String,
    restarts: usize,
    seed: u64,
}

#[derive(Serialize)]
struct ResultInfo {
    status: String,
    iterations: usize,
    #[serde(rename = "final_fG")]
    final_f_g: f64,
    final_grad_norm: f64,
    /// Residual objective of the frame the completion was taken from. A
    /// value far above zero with a tiny `final_fG` marks a geometric
    /// solution outside the residual-consistent set; the completion then
    /// does not reproduce the observations.
    #[serde(rename = "final_fF")]
    final_f_f: f64,
    perturbation_applied: bool,
    max_observation_residual: f64,
}

#[derive(Serialize)]
struct RunReport {
    problem: ProblemInfo,
    config: ConfigInfo,
    result: ResultInfo,
    completion_error: Option<f64>,
    duration_seconds: f64,
}

#[derive(Serialize)]
struct EvaluationReport {
    m: usize,
    n: usize,
    observed_entries: usize,
    max_observation_residual: f64,
    consistent: bool,
    numerical_rank: usize,
    relative_error_vs_truth: Option<f64>,
}

#[derive(Serialize)]
struct TrialInfo {
    stream: u64,
    status: String,
    iterations: usize,
    final_objective: f64,
    final_gradient_norm: f64,
    success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    connected: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    completion_relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subspace_distance: Option<f64>,
    recovered: bool,
    assumption_redraws: usize,
    monotone: bool,
    strict_decrease: bool,
}

#[derive(Serialize)]
struct CampaignReport {
    scenario: String,
    problem: ProblemInfo,
    trials: usize,
    successes: usize,
    recovery_successes: usize,
    connected_trials: Option<usize>,
    mean_iterations: f64,
    assumption_discards: usize,
    guarantee_held: bool,
    duration_seconds: f64,
    records: Vec<TrialInfo>,
}

#[derive(Serialize)]
struct GradientCheckReport {
    trials: usize,
    checked: usize,
    skipped_ties: usize,
    step: f64,
    max_relative_error: f64,
    tolerance: f64,
    pass: bool,
}

fn status_name(status: Termination) -> String {
    match status {
        Termination::ConvergedObjective => "converged_objective",
        Termination::ConvergedGradient => "converged_gradient",
        Termination::MaxIterations => "max_iterations",
    }
    .to_string()
}

fn emit(output: &Option<PathBuf>, text: &str) -> gmc_core::Result<()> {
    match output {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(EXIT_INPUT);
        }
    }
}

fn run(command: Command) -> gmc_core::Result<i32> {
    match command {
        Command::Generate {
            rows,
            cols,
            rank,
            density,
            seed,
            output,
            truth,
        } => generate(rows, cols, rank, density, seed, &output, truth.as_deref()),
        Command::Complete {
            observations,
            rank,
            solver,
            output,
            report,
            truth,
            perturb,
        } => complete(&observations, rank, &solver, output, report, truth, perturb),
        Command::Evaluate {
            observations,
            matrix,
            truth,
            output,
        } => evaluate(&observations, &matrix, truth.as_deref(), &output),
        Command::ProbeExample1 {
            grid_points,
            output,
        } => probe(grid_points, &output),
        Command::Contour {
            resolution,
            observations,
            output,
        } => contour(resolution, observations.as_deref(), &output),
        Command::VerifyGrad {
            trials,
            rows,
            cols,
            rank,
            density,
            seed,
            step_h,
            output,
        } => verify_grad(trials, rows, cols, rank, density, seed, step_h, &output),
        Command::Campaign {
            scenario,
            trials,
            rows,
            cols,
            rank,
            density,
            seed,
            output,
        } => campaign(scenario, trials, rows, cols, rank, density, seed, &output),
    }
}

fn generate(
    rows: usize,
    cols: usize,
    rank: usize,
    density: f64,
    seed: u64,
    output: &Path,
    truth: Option<&Path>,
) -> gmc_core::Result<i32> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let problem = generate_instance::<f64, _>(rows, cols, rank, density, &mut rng)?;
    io::write_observations(output, &problem.observations)?;
    if let Some(path) = truth {
        io::write_dense(path, &problem.matrix)?;
    }
    eprintln!(
        "wrote {} observations of a {rows}×{cols} rank-{rank} matrix to {}",
        problem.observations.observed_count(),
        output.display()
    );
    Ok(EXIT_OK)
}

fn complete(
    observations: &Path,
    rank: usize,
    solver: &SolverFlags,
    output: Option<PathBuf>,
    report_path: Option<PathBuf>,
    truth: Option<PathBuf>,
    perturb: Option<f64>,
) -> gmc_core::Result<i32> {
    let obs = io::read_observations::<f64>(observations)?;
    let config = solver.config();
    let start = Instant::now();
    let result: SolverResult = geodesic_descent(&obs, rank, &config)?;

    let mut frame = result.frame.clone();
    let mut final_f_f = total_objective(&frame, &obs, Metric::Frobenius)?;
    let mut perturbation_applied = false;
    if let Some(epsilon) = perturb {
        if result.final_objective() <= gmc_core::tolerances::GEOMETRIC_MEMBERSHIP {
            let repaired = gmc_core::solver::perturb_to_interior(&frame, &obs, epsilon)?;
            let repaired_f_f = total_objective(&repaired.frame, &obs, Metric::Frobenius)?;
            if repaired_f_f < final_f_f {
                frame = repaired.frame;
                final_f_f = repaired_f_f;
                perturbation_applied = true;
            }
        }
    }

    let completed = complete_matrix(&frame, &obs)?;
    let mut max_observation_residual = 0.0f64;
    for (i, j, value) in obs.triplets() {
        max_observation_residual = max_observation_residual.max((completed[(i, j)] - value).abs());
    }
    let duration = start.elapsed();

    let completion_error = match truth {
        Some(path) => {
            let reference = io::read_dense::<f64>(&path)?;
            let norm = reference.norm();
            Some(if norm > 0.0 {
                (&completed - reference).norm() / norm
            } else {
                completed.norm()
            })
        }
        None => None,
    };

    if let Some(path) = output {
        io::write_dense(&path, &completed)?;
    }

    let report = RunReport {
        problem: ProblemInfo {
            m: obs.m(),
            n: obs.n(),
            r: rank,
            mask_density: obs.density(),
            seed: config.seed,
        },
        config: ConfigInfo {
            max_iterations: config.max_iterations,
            tol_objective: config.objective_tolerance,
            tol_gradient: config.gradient_tolerance,
            step_mode: match config.step_mode {
                StepMode::Randomized => "randomized".into(),
                StepMode::Deterministic => "deterministic".into(),
            },
            restarts: config.restarts,
            seed: config.seed,
        },
        result: ResultInfo {
            status: status_name(result.status),
            iterations: result.iterations(),
            final_f_g: result.final_objective(),
            final_grad_norm: result.final_gradient_norm(),
            final_f_f,
            perturbation_applied,
            max_observation_residual,
        },
        completion_error,
        duration_seconds: duration.as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    if let Some(path) = report_path {
        std::fs::write(path, &json)?;
    }

    Ok(if result.status == Termination::ConvergedObjective {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn evaluate(
    observations: &Path,
    matrix: &Path,
    truth: Option<&Path>,
    output: &Option<PathBuf>,
) -> gmc_core::Result<i32> {
    let obs = io::read_observations::<f64>(observations)?;
    let completed = io::read_dense::<f64>(matrix)?;
    if completed.nrows() != obs.m() || completed.ncols() != obs.n() {
        return Err(gmc_core::Error::DimensionMismatch {
            context: format!(
                "matrix is {}×{} but observations describe {}×{}",
                completed.nrows(),
                completed.ncols(),
                obs.m(),
                obs.n()
            ),
        });
    }

    let mut max_residual = 0.0f64;
    for (i, j, value) in obs.triplets() {
        max_residual = max_residual.max((completed[(i, j)] - value).abs());
    }
    let mut sigma: Vec<f64> = completed
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = sigma.first().copied().unwrap_or(0.0);
    let numerical_rank = sigma.iter().filter(|&&s| s > 1e-12 * top).count();

    let relative_error_vs_truth = match truth {
        Some(path) => {
            let reference = io::read_dense::<f64>(path)?;
            let norm = reference.norm();
            Some(if norm > 0.0 {
                (&completed - reference).norm() / norm
            } else {
                completed.norm()
            })
        }
        None => None,
    };

    let report = EvaluationReport {
        m: obs.m(),
        n: obs.n(),
        observed_entries: obs.observed_count(),
        max_observation_residual: max_residual,
        consistent: max_residual <= 1e-8,
        numerical_rank,
        relative_error_vs_truth,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    emit(output, &json)?;
    Ok(EXIT_OK)
}

fn probe(grid_points: usize, output: &Option<PathBuf>) -> gmc_core::Result<i32> {
    if grid_points < 2 {
        return Err(gmc_core::Error::InvalidSpec {
            context: "need at least two grid points".into(),
        });
    }
    let grid = example1_grid::<f64>(grid_points);
    let rows = example1_probe(&grid)?;
    let mut text = String::from("epsilon,f_frobenius,f_geometric\n");
    for row in rows {
        let _ = writeln!(
            text,
            "{:.16e},{:.16e},{:.16e}",
            row.epsilon, row.frobenius, row.geometric
        );
    }
    emit(output, &text)?;
    Ok(EXIT_OK)
}

fn contour(
    resolution: usize,
    observations: Option<&Path>,
    output: &Option<PathBuf>,
) -> gmc_core::Result<i32> {
    if resolution < 16 {
        return Err(gmc_core::Error::InvalidSpec {
            context: format!("contour resolution {resolution} below the minimum of 16"),
        });
    }
    let obs = match observations {
        Some(path) => {
            let parsed = io::read_observations::<f64>(path)?;
            if parsed.m() != 3 || parsed.n() != 1 {
                return Err(gmc_core::Error::InvalidSpec {
                    context: format!(
                        "contour needs a 3×1 observation file, got {}×{}",
                        parsed.m(),
                        parsed.n()
                    ),
                });
            }
            parsed
        }
        None => gmc_core::verify::example1_observations::<f64>(),
    };
    let basis = column_basis(&obs, 0)?;

    let mut text = String::from("u2,u3,f_F,f_G\n");
    for iu2 in 0..resolution {
        for iu3 in 0..resolution {
            let u2 = -1.0 + 2.0 * iu2 as f64 / (resolution - 1) as f64;
            let u3 = -1.0 + 2.0 * iu3 as f64 / (resolution - 1) as f64;
            let radius_sq = u2 * u2 + u3 * u3;
            if radius_sq > 1.0 {
                continue;
            }
            let u1 = (1.0 - radius_sq).max(0.0).sqrt();
            let frame = Frame::new(nalgebra::DMatrix::from_column_slice(3, 1, &[u1, u2, u3]))?;
            let f_f = atomic_frobenius(&frame, &obs, 0)?;
            let f_g = match &basis {
                Some(basis) => atomic_geometric(&frame, basis)?.value,
                None => 0.0,
            };
            let _ = writeln!(text, "{u2:.16e},{u3:.16e},{f_f:.16e},{f_g:.16e}");
        }
    }
    emit(output, &text)?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn verify_grad(
    trials: usize,
    rows: usize,
    cols: usize,
    rank: usize,
    density: f64,
    seed: u64,
    step_h: f64,
    output: &Option<PathBuf>,
) -> gmc_core::Result<i32> {
    use rand::SeedableRng;
    use rand_distr::Distribution;

    let tolerance = 1e-5;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0usize;
    let mut skipped_ties = 0usize;
    let mut worst = 0.0f64;
    let mut attempts = 0usize;

    while checked < trials && attempts < 20 * trials.max(1) {
        attempts += 1;
        let problem = generate_instance::<f64, _>(rows, cols, rank, density, &mut rng)?;
        let obs = &problem.observations;
        let u: Frame<f64> = haar_sample(rows, rank, &mut rng)?;

        let mut tied = false;
        for i in 0..obs.n() {
            if let Some(basis) = column_basis(obs, i)? {
                if atomic_geometric(&u, &basis)?.gap <= 1e-6 {
                    tied = true;
                    break;
                }
            }
        }
        if tied {
            skipped_ties += 1;
            continue;
        }

        let mut analytic = Vec::with_capacity(20);
        let mut estimated = Vec::with_capacity(20);
        for _ in 0..20 {
            let raw = nalgebra::DMatrix::from_fn(rows, rank, |_, _| {
                rand_distr::StandardNormal.sample(&mut rng)
            });
            let direction = horizontal_project(&u, &raw)?;
            let direction = direction.scaled(1.0 / direction.norm());
            analytic.push(directional_derivative(&u, &direction, obs)?);
            estimated.push(finite_difference_directional(&u, &direction, obs, step_h)?);
        }
        let difference: f64 = analytic
            .iter()
            .zip(&estimated)
            .map(|(a, e)| (a - e) * (a - e))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        if scale > 0.0 {
            worst = worst.max(difference / scale);
        }
        checked += 1;
    }

    let report = GradientCheckReport {
        trials,
        checked,
        skipped_ties,
        step: step_h,
        max_relative_error: worst,
        tolerance,
        pass: checked == trials && worst <= tolerance,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    emit(output, &json)?;
    Ok(if report.pass {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[allow(clippy::too_many_arguments)]
fn campaign(
    scenario: ScenarioArg,
    trials: usize,
    rows: usize,
    cols: usize,
    rank: usize,
    density: f64,
    seed: u64,
    output: &Option<PathBuf>,
) -> gmc_core::Result<i32> {
    let scenario: Scenario = scenario.into();
    let start = Instant::now();
    let stats: CampaignStats =
        monte_carlo_guarantee(scenario, rows, cols, rank, density, trials, seed)?;
    let duration = start.elapsed();

    let connected_trials = match scenario {
        Scenario::RankOneArbitrary => Some(
            stats
                .records
                .iter()
                .filter(|t| t.connected == Some(true))
                .count(),
        ),
        _ => None,
    };
    let held = stats.guarantee_held();
    let report = CampaignReport {
        scenario: scenario.as_str().into(),
        problem: ProblemInfo {
            m: rows,
            n: cols,
            r: rank,
            mask_density: density,
            seed,
        },
        trials: stats.trials,
        successes: stats.successes,
        recovery_successes: stats.recovery_successes,
        connected_trials,
        mean_iterations: stats.mean_iterations,
        assumption_discards: stats.assumption_discards,
        guarantee_held: held,
        duration_seconds: duration.as_secs_f64(),
        records: stats
            .records
            .iter()
            .map(|t| TrialInfo {
                stream: t.stream,
                status: status_name(t.status),
                iterations: t.iterations,
                final_objective: t.final_objective,
                final_gradient_norm: t.final_gradient_norm,
                success: t.success,
                connected: t.connected,
                completion_relative_error: t.completion_relative_error,
                subspace_distance: t.subspace_distance,
                recovered: t.recovered,
                assumption_redraws: t.assumption_redraws,
                monotone: t.monotone,
                strict_decrease: t.strict_decrease,
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    emit(output, &json)?;
    Ok(if held { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
