//! Hermite kernels against Monte Carlo estimates of `E[φ(αx)φ(βy)]`,
//! `corr(x, y) = ρ`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use sgda_core::hermite::{dual_kernel, expand_activation, nonunit_kernel, DEFAULT_NODES};
use sgda_core::model::ActivationSpec;
use sgda_core::{derive_seed, seeded_rng};

use crate::config::KernelCheckConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheckRow {
    pub activation: String,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    /// Series value (dual kernel at unit scales, scaled kernel otherwise).
    pub kernel: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    /// `|kernel − mc_mean| / mc_se`.
    pub z: f64,
    pub pass: bool,
}

/// Sample mean and its standard error.
pub fn monte_carlo_pair(act: &ActivationSpec, alpha: f64, beta: f64, rho: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = seeded_rng(seed);
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let x: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let v = act.value(alpha * x) * act.value(beta * (rho * x + c * e));
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Evaluates every `(activation, scale pair, ρ)` cell; cells run on the
/// current rayon pool, each with its own seed.
pub fn kernel_check(cfg: &KernelCheckConfig, degree: usize, seed: u64) -> Result<Vec<KernelCheckRow>> {
    let exps = cfg
        .activations
        .iter()
        .map(|a| expand_activation(a, degree, DEFAULT_NODES))
        .collect::<sgda_core::Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for ai in 0..cfg.activations.len() {
        for &(alpha, beta) in &cfg.scales {
            for &rho in &cfg.rhos {
                cells.push((ai, alpha, beta, rho));
            }
        }
    }
    Ok(cells
        .par_iter()
        .enumerate()
        .map(|(i, &(ai, alpha, beta, rho))| {
            let act = &cfg.activations[ai];
            let kernel = if alpha == 1.0 && beta == 1.0 { dual_kernel(&exps[ai], rho) } else { nonunit_kernel(&exps[ai], alpha, beta, rho) };
            let (mc_mean, mc_se) = monte_carlo_pair(act, alpha, beta, rho, cfg.samples, derive_seed(seed, i as u64));
            let diff = (kernel - mc_mean).abs();
            let z = if mc_se > 0.0 { diff / mc_se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            KernelCheckRow {
                activation: act.name().to_string(),
                alpha,
                beta,
                rho,
                kernel,
                mc_mean,
                mc_se,
                z,
                pass: diff <= cfg.tolerance_se * mc_se + 1e-12,
            }
        })
        .collect())
}
