//! Trial orchestration: ground truth, observations, training, per-trial
//! CSVs and the aggregated summary.
//!
//! Every random stream is derived from `(config seed, d, n, trial, purpose)`,
//! so results do not depend on scheduling or worker count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sgda_core::model::GroundTruth;
use sgda_core::optimizer::{initial_params, learn_marginal_norms, sgda_run_from, MarginalFit, Stage, TrajectoryRecord};
use sgda_core::{derive_seed, seeded_rng, Mat};

use crate::config::{DataMode, ExperimentConfig, TruthMode};
use crate::error::{HarnessError, Result};
use crate::output::{self, SummaryRow, FAILURES_HEADER};

const TRUTH: u64 = 1;
const DATA: u64 = 2;
const TRAIN: u64 = 3;
const INIT: u64 = 4;

/// Seed for one random stream of a trial.
pub fn stream_seed(root: u64, d: usize, n: usize, trial: usize, purpose: u64) -> u64 {
    [d as u64, n as u64, trial as u64, purpose].iter().fold(root, |s, &v| derive_seed(s, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    /// Fill the `wall_ms` column from a monotonic clock.
    pub wall_clock: bool,
    /// Write per-trial trajectory and final-parameter files.
    pub write_trials: bool,
}

/// Ground truth and observations of one trial.
#[derive(Debug, Clone)]
pub struct Problem {
    pub truth: GroundTruth,
    pub samples: Mat,
}

/// The problem a trial trains on.
pub fn problem_for(cfg: &ExperimentConfig, d: usize, n: usize, trial: usize) -> Problem {
    let trial = match cfg.data {
        DataMode::PerTrial => trial,
        DataMode::Shared => 0,
    };
    let truth = match &cfg.truth {
        TruthMode::Explicit(m) => GroundTruth::new(m.clone()),
        TruthMode::RandomUnitRows => {
            let n_key = if cfg.data == DataMode::Shared { 0 } else { n };
            let mut rng = seeded_rng(stream_seed(cfg.seed, d, n_key, trial, TRUTH));
            GroundTruth::random_unit_rows(d, cfg.k0, &mut rng)
        }
    };
    let samples = truth.sample(n, &cfg.activation, &mut seeded_rng(stream_seed(cfg.seed, d, n, trial, DATA)));
    Problem { truth, samples }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub truth: GroundTruth,
    pub marginal: Option<MarginalFit>,
    pub trajectory: TrajectoryRecord,
}

impl TrialResult {
    pub fn final_wall_ms(&self) -> u64 {
        self.trajectory.rows.last().map_or(0, |r| r.wall_ms)
    }
}

/// Trains one trial on a prepared problem.
pub fn run_trial(cfg: &ExperimentConfig, problem: &Problem, d: usize, n: usize, trial: usize, wall_clock: bool) -> Result<TrialResult> {
    let mut tc = cfg.train_for(n);
    tc.seed = stream_seed(cfg.seed, d, n, trial, TRAIN);
    let act = &cfg.activation;
    let marginal = match tc.stage {
        Stage::Marginal => {
            return Err(HarnessError::Config("stage = marginal produces no trajectory; use joint or both".into()));
        }
        Stage::Joint => None,
        Stage::Both => Some(learn_marginal_norms(&problem.samples, act, &tc)?),
    };
    let targets = marginal.as_ref().map_or(&problem.truth.row_norms, |m| &m.norms);
    let mut rng = seeded_rng(stream_seed(cfg.seed, d, n, trial, INIT));
    let a0 = initial_params(targets, cfg.k, tc.init, &mut rng);
    let start = Instant::now();
    let clock = move || start.elapsed().as_millis() as u64;
    let clock_ref: Option<&dyn Fn() -> u64> = if wall_clock { Some(&clock) } else { None };
    let trajectory = sgda_run_from(&problem.samples, act, &tc, targets, &problem.truth.z_star, a0, clock_ref)?;
    Ok(TrialResult { d, n, trial, truth: problem.truth.clone(), marginal, trajectory })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<TrialFailure>,
    /// Successful trials in `(d, n, trial)` order.
    pub trials: Vec<TrialResult>,
}

pub fn trajectory_file(dir: &Path, d: usize, n: usize, trial: usize) -> PathBuf {
    dir.join(format!("traj_d{d}_n{n}_trial{trial:03}.csv"))
}

pub fn final_a_file(dir: &Path, d: usize, n: usize, trial: usize) -> PathBuf {
    dir.join(format!("final_a_d{d}_n{n}_trial{trial:03}.csv"))
}

pub fn summary_file(dir: &Path) -> PathBuf {
    dir.join("summary.csv")
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups successful trials by cell, in grid order.
pub fn aggregate(cfg: &ExperimentConfig, trials: &[TrialResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &d in &cfg.dims {
        for &n in &cfg.n_grid {
            let cell: Vec<&TrialResult> = trials.iter().filter(|t| t.d == d && t.n == n).collect();
            if cell.is_empty() {
                continue;
            }
            let errs: Vec<f64> = cell.iter().map(|t| t.trajectory.final_rec_err).collect();
            let walls: Vec<f64> = cell.iter().map(|t| t.final_wall_ms() as f64).collect();
            let (mean_rec_err, std_rec_err) = mean_std(&errs);
            rows.push(SummaryRow { d, n, trials: cell.len(), mean_rec_err, std_rec_err, mean_wall_ms: mean_std(&walls).0 });
        }
    }
    rows
}

fn failures_csv(failures: &[TrialFailure]) -> String {
    let mut s = String::from(FAILURES_HEADER);
    s.push('\n');
    for f in failures {
        let msg = f.message.replace([',', '\n'], ";");
        s.push_str(&format!("{},{},{},{msg}\n", f.d, f.n, f.trial));
    }
    s
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| HarnessError::Pool(e.to_string()))
}

/// Runs `trials × |d grid| × |n grid|` trials on a bounded worker pool.
///
/// Failed trials are recorded and skipped by the aggregation. With
/// `write_trials` each trial writes its own trajectory and final-parameter
/// file; the summary (and `failures.csv`) are written once at the end.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SweepSummary> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let cells: Vec<(usize, usize)> = cfg.dims.iter().flat_map(|&d| cfg.n_grid.iter().map(move |&n| (d, n))).collect();
    let tasks: Vec<(usize, usize, usize)> =
        cells.iter().flat_map(|&(d, n)| (0..cfg.trials).map(move |t| (d, n, t))).collect();

    let outcomes: Vec<Result<TrialResult>> = pool(opts.threads)?.install(|| {
        let shared: Vec<Option<Problem>> = cells
            .par_iter()
            .map(|&(d, n)| (cfg.data == DataMode::Shared).then(|| problem_for(cfg, d, n, 0)))
            .collect();
        tasks
            .par_iter()
            .map(|&(d, n, trial)| {
                let cell = cells.iter().position(|&c| c == (d, n)).expect("task from grid");
                let owned;
                let problem = match &shared[cell] {
                    Some(p) => p,
                    None => {
                        owned = problem_for(cfg, d, n, trial);
                        &owned
                    }
                };
                let result = run_trial(cfg, problem, d, n, trial, opts.wall_clock)?;
                if opts.write_trials {
                    output::write_file(&trajectory_file(dir, d, n, trial), &output::trajectory_csv(trial, &result.trajectory.rows))?;
                    output::write_file(&final_a_file(dir, d, n, trial), &output::matrix_csv(&result.trajectory.final_a))?;
                }
                Ok(result)
            })
            .collect()
    });

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (&(d, n, trial), outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(r) => trials.push(r),
            Err(HarnessError::Core(e)) => failures.push(TrialFailure { d, n, trial, message: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    let rows = aggregate(cfg, &trials);
    output::write_file(&summary_file(dir), &output::summary_csv(&rows))?;
    if !failures.is_empty() {
        output::write_file(&dir.join("failures.csv"), &failures_csv(&failures))?;
    }
    Ok(SweepSummary { rows, failures, trials })
}
