//! Two-stage training: marginal-norm recovery with a first-moment
//! discriminator, then projected stochastic gradient descent-ascent against
//! the quadratic discriminator.
//!
//! The discriminator step is exact in both stages. The regularised game is
//! a concave quadratic in the discriminator, so one ascent step of size one
//! lands on its maximiser and the generator update is plain stochastic
//! gradient descent on the resulting max-function.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermite::SplitGaussian;
use crate::linalg::{norm, Mat};
use crate::losses::{empirical_cov, f1_value_grad, feature_means, stage2_value_grad};
use crate::model::{sample_latent, uniform_on_sphere, ActivationSpec};
use crate::{derive_seed, seeded_rng};

/// Which stages [`train`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Marginal-norm recovery only.
    Marginal,
    /// Quadratic-discriminator stage with known norm targets.
    Joint,
    /// Marginal recovery feeding its estimates to the joint stage.
    Both,
}

/// Initial generator matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Rows uniform on the sphere, scaled to the norm targets.
    Sphere,
    /// I.i.d. `N(0, scale²/k)` entries.
    Gaussian { scale: f64 },
}

/// Hyperparameters of both training stages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Generator learning rate `η`.
    pub eta: f64,
    /// Iteration count `T` of the joint stage.
    pub iters: usize,
    /// Generator batch size `m`.
    pub m: usize,
    /// Observation count `n`.
    pub n: usize,
    /// Latent dimension; `None` means `k = d`.
    pub k: Option<usize>,
    /// Frobenius radius of the injected noise; `None` means `0.01·η`.
    pub noise_scale: Option<f64>,
    pub seed: u64,
    pub stage: Stage,
    /// Stop once `g_emp < stop_tol` for 50 consecutive iterations; 0 disables.
    pub stop_tol: f64,
    /// Project rows back onto their norm targets after every step.
    pub project: bool,
    pub init: Init,
    /// Keep every `record_every`-th trajectory row (the last is always kept).
    pub record_every: usize,
    /// Learning rate of the marginal stage. `None` uses `0.1 / s²`, with
    /// `s = d/dα E[ψ(αz)]` at the starting norm `α = 1`.
    pub marginal_eta: Option<f64>,
    pub marginal_iters: usize,
    pub marginal_batch: usize,
    /// Relative moment-matching residual accepted by the marginal stage.
    pub marginal_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.05,
            iters: 1000,
            m: 1000,
            n: 1000,
            k: None,
            noise_scale: None,
            seed: 0,
            stage: Stage::Joint,
            stop_tol: 0.0,
            project: true,
            init: Init::Sphere,
            record_every: 1,
            marginal_eta: None,
            marginal_iters: 2000,
            marginal_batch: 1000,
            marginal_tol: 1e-2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument("eta must be positive"));
        }
        if self.iters == 0 || self.m == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("iters, m and n must be at least 1"));
        }
        if self.k == Some(0) {
            return Err(Error::InvalidArgument("latent dimension must be at least 1"));
        }
        if self.noise_scale.is_some_and(|r| !(r >= 0.0)) || !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidArgument("noise_scale and stop_tol must be nonnegative"));
        }
        if let Init::Gaussian { scale } = self.init {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidArgument("init scale must be positive"));
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1"));
        }
        if self.marginal_eta.is_some_and(|e| !(e > 0.0 && e.is_finite())) || self.marginal_iters < 2 || self.marginal_batch == 0 {
            return Err(Error::InvalidArgument("invalid marginal-stage settings"));
        }
        Ok(())
    }

    pub fn effective_noise(&self) -> f64 {
        self.noise_scale.unwrap_or(0.01 * self.eta)
    }
}

/// One recorded iteration.
///
/// `g_emp` and `grad_norm` are measured on the batch drawn at this
/// iteration, before the update; `rec_err = ‖AAᵀ − Z*‖_F` is measured after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub iter: usize,
    pub g_emp: f64,
    pub rec_err: f64,
    pub grad_norm: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub final_a: Mat,
    pub final_rec_err: f64,
    /// Iterations actually run (less than `T` after early stopping).
    pub iterations: usize,
    /// Rows that hit the zero-row fallback of the projection.
    pub zero_row_events: usize,
}

/// Rescales row `i` of `a` to norm `targets[i]`.
///
/// Errors on a zero row; see [`project_rows_with_fallback`].
pub fn project_rows(a: &Mat, targets: &[f64]) -> Result<Mat> {
    check_targets(a, targets)?;
    let mut out = a.clone();
    for (i, &t) in targets.iter().enumerate() {
        let r = norm(a.row(i));
        if r == 0.0 {
            return Err(Error::ZeroRow(i));
        }
        if r != t {
            for v in out.row_mut(i) {
                *v *= t / r;
            }
        }
    }
    Ok(out)
}

/// [`project_rows`], replacing a zero row by a uniformly random direction at
/// the target norm. Returns the indices of replaced rows.
pub fn project_rows_with_fallback<R: Rng + ?Sized>(
    a: &Mat,
    targets: &[f64],
    rng: &mut R,
) -> Result<(Mat, Vec<usize>)> {
    check_targets(a, targets)?;
    let mut out = a.clone();
    let mut replaced = Vec::new();
    for (i, &t) in targets.iter().enumerate() {
        let r = norm(a.row(i));
        if r == 0.0 {
            let dir = uniform_on_sphere(a.cols(), rng);
            for (dst, u) in out.row_mut(i).iter_mut().zip(dir) {
                *dst = t * u;
            }
            replaced.push(i);
        } else if r != t {
            for v in out.row_mut(i) {
                *v *= t / r;
            }
        }
    }
    Ok((out, replaced))
}

fn check_targets(a: &Mat, targets: &[f64]) -> Result<()> {
    if targets.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "project_rows",
            expected: (a.rows(), 1),
            found: (targets.len(), 1),
        });
    }
    if targets.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("norm targets must be positive"));
    }
    Ok(())
}

/// Result of the marginal stage.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalFit {
    pub norms: Vec<f64>,
    /// Observed feature means `μ_i`.
    pub targets: Vec<f64>,
    /// Largest `|E[ψ(α̂_i z)] − μ_i| / μ_i`, by [`SplitGaussian`] quadrature.
    pub residual: f64,
}

/// Recovers the row norms `‖a*_i‖` from observations alone.
///
/// The marginal of coordinate `i` depends on `a_i` only through its norm, so
/// the stage runs on a single latent coordinate. Each step sets the
/// discriminator to its exact maximiser `v = μ_obs − μ_gen` on one fresh
/// batch and takes a gradient step on `A` on another; the returned norms are
/// averaged over the second half of the run.
pub fn learn_marginal_norms(samples: &Mat, act: &ActivationSpec, config: &TrainConfig) -> Result<MarginalFit> {
    config.validate()?;
    let d = samples.rows();
    if samples.cols() == 0 || d == 0 {
        return Err(Error::InvalidArgument("marginal stage needs observations"));
    }
    let targets = feature_means(samples, act);
    for (i, &mu) in targets.iter().enumerate() {
        if !(mu > 1e-12) {
            return Err(Error::DegenerateTarget { row: i });
        }
    }
    let quad = SplitGaussian::new()?;
    let eta = match config.marginal_eta {
        Some(e) => e,
        None => {
            let slope = quad.expect(|x| act.marginal_feature_of_preactivation(x).1 * x);
            0.1 / (slope * slope)
        }
    };
    let mut rng = seeded_rng(derive_seed(config.seed, 0x6d61_7267));
    let mut a = Mat::from_vec(d, 1, vec![1.0; d])?;
    let mut v = vec![0.0; d];
    let burn_in = config.marginal_iters / 2;
    let mut sum = vec![0.0; d];
    for t in 0..config.marginal_iters {
        let z = sample_latent(1, config.marginal_batch, &mut rng);
        let e = f1_value_grad(&a, &v, samples, &z, act)?;
        for (vi, g) in v.iter_mut().zip(&e.grad_v) {
            *vi += g;
        }
        // A fresh batch keeps the step on A uncorrelated with the gap in v.
        let z = sample_latent(1, config.marginal_batch, &mut rng);
        let e = f1_value_grad(&a, &v, samples, &z, act)?;
        a.axpy(-eta, &e.grad_a)?;
        if !a.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }
        if t >= burn_in {
            for (s, x) in sum.iter_mut().zip(a.as_slice()) {
                *s += x.abs();
            }
        }
    }
    let count = (config.marginal_iters - burn_in) as f64;
    let norms: Vec<f64> = sum.iter().map(|s| s / count).collect();
    let residual = norms
        .iter()
        .zip(&targets)
        .map(|(&alpha, &mu)| (quad.expect(|x| act.marginal_feature_of_preactivation(alpha * x).0) - mu).abs() / mu)
        .fold(0.0, f64::max);
    if !(residual <= config.marginal_tol) {
        return Err(Error::NonConvergence { iterations: config.marginal_iters, residual });
    }
    Ok(MarginalFit { norms, targets, residual })
}

/// Initial generator matrix for the joint stage.
pub fn initial_params<R: Rng + ?Sized>(targets: &[f64], k: usize, init: Init, rng: &mut R) -> Mat {
    let d = targets.len();
    let mut a = Mat::zeros(d, k);
    match init {
        Init::Sphere => {
            for (i, &t) in targets.iter().enumerate() {
                let u = uniform_on_sphere(k, rng);
                for (dst, x) in a.row_mut(i).iter_mut().zip(u) {
                    *dst = t * x;
                }
            }
        }
        Init::Gaussian { scale } => {
            let s = scale / crate::math::sqrt(k as f64);
            for v in a.as_mut_slice() {
                let g: f64 = StandardNormal.sample(rng);
                *v = s * g;
            }
        }
    }
    a
}

/// Runs the quadratic-discriminator stage from a random initial point.
pub fn sgda_run(
    samples: &Mat,
    act: &ActivationSpec,
    config: &TrainConfig,
    norm_targets: &[f64],
    z_star: &Mat,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let k = config.k.unwrap_or(samples.rows());
    let mut rng = seeded_rng(derive_seed(config.seed, 0x696e_6974));
    check_targets(&Mat::zeros(samples.rows(), k), norm_targets)?;
    let a0 = initial_params(norm_targets, k, config.init, &mut rng);
    sgda_run_from(samples, act, config, norm_targets, z_star, a0, None)
}

/// Runs the quadratic-discriminator stage from `a0`.
///
/// `clock`, when given, supplies milliseconds for the `wall_ms` column;
/// otherwise the column is zero and the output is a pure function of the
/// inputs.
pub fn sgda_run_from(
    samples: &Mat,
    act: &ActivationSpec,
    config: &TrainConfig,
    norm_targets: &[f64],
    z_star: &Mat,
    a0: Mat,
    clock: Option<&dyn Fn() -> u64>,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let d = samples.rows();
    if a0.rows() != d || z_star.shape() != (d, d) {
        return Err(Error::DimensionMismatch { op: "sgda_run", expected: (d, d), found: z_star.shape() });
    }
    check_targets(&a0, norm_targets)?;
    let cov = empirical_cov(samples)?;
    let k = a0.cols();
    let mut batch_rng = seeded_rng(derive_seed(config.seed, 0x6261_7463));
    let mut noise_rng = seeded_rng(derive_seed(config.seed, 0x6e6f_6973));
    let radius = config.effective_noise();
    let start = clock.map(|c| c());
    let mut zero_row_events = 0;
    let mut a = if config.project {
        let (p, hit) = project_rows_with_fallback(&a0, norm_targets, &mut noise_rng)?;
        zero_row_events += hit.len();
        p
    } else {
        a0
    };
    let mut rows = Vec::with_capacity(config.iters / config.record_every + 1);
    let mut below = 0usize;
    let mut iterations = 0;
    for t in 1..=config.iters {
        let z = sample_latent(k, config.m, &mut batch_rng);
        let eval = stage2_value_grad(&a, &cov, &z, act)?;
        if !eval.value.is_finite() || !eval.grad.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }
        let mut step = eval.grad.clone();
        if radius > 0.0 {
            let mut e = Mat::zeros(d, k);
            for v in e.as_mut_slice() {
                *v = StandardNormal.sample(&mut noise_rng);
            }
            let en = e.frobenius();
            if en > 0.0 {
                step.axpy(radius / en, &e)?;
            }
        }
        a.axpy(-config.eta, &step)?;
        if config.project {
            let (p, hit) = project_rows_with_fallback(&a, norm_targets, &mut noise_rng)?;
            zero_row_events += hit.len();
            a = p;
        }
        if !a.is_finite() {
            return Err(Error::Divergence { iteration: t });
        }
        iterations = t;
        if config.stop_tol > 0.0 && eval.value < config.stop_tol {
            below += 1;
        } else {
            below = 0;
        }
        let stopping = below >= 50;
        if t % config.record_every == 0 || t == config.iters || stopping {
            let wall_ms = match (clock, start) {
                (Some(c), Some(s)) => c().saturating_sub(s),
                _ => 0,
            };
            rows.push(TrajectoryRow {
                iter: t,
                g_emp: eval.value,
                rec_err: recovery_error(&a, z_star),
                grad_norm: eval.grad.frobenius(),
                wall_ms,
            });
        }
        if stopping {
            break;
        }
    }
    let final_rec_err = recovery_error(&a, z_star);
    Ok(TrajectoryRecord { rows, final_a: a, final_rec_err, iterations, zero_row_events })
}

/// `‖AAᵀ − Z*‖_F`.
pub fn recovery_error(a: &Mat, z_star: &Mat) -> f64 {
    a.gram().sub(z_star).map(|m| m.frobenius()).unwrap_or(f64::INFINITY)
}

/// Output of [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub marginal: Option<MarginalFit>,
    pub trajectory: Option<TrajectoryRecord>,
}

/// Runs the configured stages.
///
/// `known_norms` supplies the projection targets for [`Stage::Joint`]; with
/// [`Stage::Both`] they come from the marginal stage instead.
pub fn train(
    samples: &Mat,
    act: &ActivationSpec,
    config: &TrainConfig,
    z_star: &Mat,
    known_norms: Option<&[f64]>,
) -> Result<TrainOutcome> {
    match config.stage {
        Stage::Marginal => {
            Ok(TrainOutcome { marginal: Some(learn_marginal_norms(samples, act, config)?), trajectory: None })
        }
        Stage::Joint => {
            let targets = known_norms.ok_or(Error::InvalidArgument("joint stage needs norm targets"))?;
            let traj = sgda_run(samples, act, config, targets, z_star)?;
            Ok(TrainOutcome { marginal: None, trajectory: Some(traj) })
        }
        Stage::Both => {
            let fit = learn_marginal_norms(samples, act, config)?;
            let traj = sgda_run(samples, act, config, &fit.norms, z_star)?;
            Ok(TrainOutcome { marginal: Some(fit), trajectory: Some(traj) })
        }
    }
}
