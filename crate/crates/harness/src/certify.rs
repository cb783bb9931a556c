//! Structured stationarity and recovery reports for a trained `A`.

use serde::Serialize;
use sgda_core::hermite::{expand_activation, DEFAULT_NODES};
use sgda_core::model::{ActivationSpec, GroundTruth};
use sgda_core::stationarity::{
    fosp_certificate, fosp_certificate_unconstrained, recovery_bound_check, sosp_residual, DEFAULT_PROBES,
};
use sgda_core::Mat;

use crate::error::Result;

/// Accepted `max_i |Z_ii − y_i|` for the constrained certificate.
pub const DIAG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FospMode {
    /// Diagonal constraints `Z_ii = y_i` with fitted multipliers.
    Constrained,
    /// No diagonal constraints; `S` is the gradient itself.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SospReport {
    pub eps_feas: f64,
    pub eps_grad: f64,
    pub eps_curv: f64,
    pub max_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FospReport {
    pub mode: FospMode,
    pub eps: f64,
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub rhs_rank_adjusted: f64,
    pub holds_rank_adjusted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub activation: String,
    pub d: usize,
    pub k: usize,
    pub sigma1: f64,
    pub rec_err: f64,
    pub sosp: SospReport,
    pub fosp: FospReport,
    pub bound: BoundReport,
}

/// Runs the SOSP residual, the FOSP certificate of the given mode and the
/// recovery-bound comparison at `A`.
pub fn certify(a: &Mat, truth: &GroundTruth, act: &ActivationSpec, degree: usize, mode: FospMode, seed: u64) -> Result<CertificateReport> {
    let exp = expand_activation(act, degree, DEFAULT_NODES)?;
    let sosp = sosp_residual(a, &exp, truth, DEFAULT_PROBES, seed)?;
    let z = a.gram();
    let fosp = match mode {
        FospMode::Constrained => fosp_certificate(&z, &exp, truth, DIAG_TOL)?,
        FospMode::Unconstrained => fosp_certificate_unconstrained(&z, &exp, truth)?,
    };
    let sigma1 = exp.sigma(1);
    let b = recovery_bound_check(&z, fosp.eps, sigma1, truth)?;
    Ok(CertificateReport {
        activation: act.name().to_string(),
        d: a.rows(),
        k: a.cols(),
        sigma1,
        rec_err: b.lhs,
        sosp: SospReport { eps_feas: sosp.eps_feas, eps_grad: sosp.eps_grad, eps_curv: sosp.eps_curv, max_eps: sosp.max_eps() },
        fosp: FospReport { mode, eps: fosp.eps, multipliers: fosp.sigma },
        bound: BoundReport {
            lhs: b.lhs,
            rhs: b.rhs,
            holds: b.holds,
            rhs_rank_adjusted: b.rhs_rank_adjusted,
            holds_rank_adjusted: b.holds_rank_adjusted,
        },
    })
}
