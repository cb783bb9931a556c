//! Approximate KKT certificates for the diagonally constrained problem
//!
//! ```text
//! min_A g̃(AAᵀ)   s.t.   (AAᵀ)_ii = y_i,
//! g̃(Z) = ½ Σ_jl (κ_jl(Z_jl) − κ_jl(Z*_jl))²,
//! ```
//!
//! where `κ_jl(z) = E[φ(α_j x̂) φ(α_l ŷ)]` at correlation `z/(α_j α_l)` and
//! `α_i = √y_i` are the ground-truth row norms. At unit norms `κ` is the
//! dual kernel.
//!
//! With `G = ∇_Z g̃` and multipliers `λ`, the slack is `S = G − diag(λ)`.
//! Residuals against the column space are measured as `‖S U‖₂` for an
//! orthonormal basis `U` of that space, which does not depend on the basis.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermite::{HermiteExpansion, ScaledKernel};
use crate::linalg::{dot, spectral_norm, Mat, SymmetricEigen};
use crate::losses::scalar_loss_derivative;
use crate::model::GroundTruth;
use crate::seeded_rng;

/// Relative eigenvalue threshold deciding the numerical column space.
pub const RANK_THRESHOLD: f64 = 1e-10;
/// Default number of random tangent probes.
pub const DEFAULT_PROBES: usize = 64;
/// Additive slack of [`recovery_bound_check`].
pub const BOUND_TOLERANCE: f64 = 1e-6;

/// Entrywise kernels `κ_jl` as polynomials in `Z_jl`.
#[derive(Debug, Clone)]
pub struct EntryKernels {
    d: usize,
    scales: Vec<f64>,
    /// Upper triangle, row-major.
    polys: Vec<ScaledKernel>,
}

impl EntryKernels {
    pub fn new(exp: &HermiteExpansion, scales: &[f64]) -> Result<Self> {
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("kernel scales must be positive"));
        }
        let d = scales.len();
        let mut polys = Vec::with_capacity(d * (d + 1) / 2);
        for j in 0..d {
            for l in j..d {
                polys.push(ScaledKernel::new(exp, scales[j], scales[l]));
            }
        }
        Ok(EntryKernels { d, scales: scales.to_vec(), polys })
    }

    fn index(&self, j: usize, l: usize) -> usize {
        let (j, l) = if j <= l { (j, l) } else { (l, j) };
        j * self.d - j * (j + 1) / 2 + l
    }

    /// `(κ, κ', κ'')` at `z`, derivatives taken in `z`.
    pub fn eval(&self, j: usize, l: usize, z: f64) -> (f64, f64, f64) {
        let c = self.scales[j] * self.scales[l];
        let p = &self.polys[self.index(j, l)];
        let rho = z / c;
        (p.value(rho), p.deriv(rho) / c, p.deriv2(rho) / (c * c))
    }

    /// `g̃(Z)`.
    pub fn loss(&self, z: &Mat, z_star: &Mat) -> f64 {
        let mut total = 0.0;
        for j in 0..self.d {
            for l in 0..self.d {
                let r = self.eval(j, l, z[(j, l)]).0 - self.eval(j, l, z_star[(j, l)]).0;
                total += 0.5 * r * r;
            }
        }
        total
    }

    /// `G = ∇_Z g̃` and the entrywise second derivative `H`.
    pub fn grad_and_curvature(&self, z: &Mat, z_star: &Mat) -> (Mat, Mat) {
        let mut g = Mat::zeros(self.d, self.d);
        let mut h = Mat::zeros(self.d, self.d);
        for j in 0..self.d {
            for l in 0..self.d {
                let (k, k1, k2) = self.eval(j, l, z[(j, l)]);
                let r = k - self.eval(j, l, z_star[(j, l)]).0;
                g[(j, l)] = r * k1;
                h[(j, l)] = k1 * k1 + r * k2;
            }
        }
        (g, h)
    }
}

/// Multipliers, slack matrix and residuals of the approximate SOSP conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityCertificate {
    pub lambda: Vec<f64>,
    pub s: Mat,
    /// `max_i |(AAᵀ)_ii − y_i|`.
    pub eps_feas: f64,
    /// `‖S U‖₂`, `U` an orthonormal basis of the column space of `A`.
    pub eps_grad: f64,
    /// Smallest `Tr(Bᵀ D∇_A L[B]) / ‖B‖_F²` over the tangent probes.
    pub eps_curv: f64,
}

impl StationarityCertificate {
    /// Smallest `ε` for which all three conditions hold.
    pub fn max_eps(&self) -> f64 {
        self.eps_feas.max(self.eps_grad).max((-self.eps_curv).max(0.0))
    }
}

/// Least-squares multipliers `λ_i = ⟨(GA)_i, a_i⟩ / ‖a_i‖²`, minimising
/// `‖(G − diag λ) A‖_F` row by row.
pub fn fit_multipliers(a: &Mat, grad_z: &Mat) -> Result<Vec<f64>> {
    let ga = grad_z.matmul(a)?;
    (0..a.rows())
        .map(|i| {
            let nn = dot(a.row(i), a.row(i));
            if nn == 0.0 {
                Err(Error::ZeroRow(i))
            } else {
                Ok(dot(ga.row(i), a.row(i)) / nn)
            }
        })
        .collect()
}

fn slack(grad_z: &Mat, lambda: &[f64]) -> Mat {
    let mut s = grad_z.symmetrize();
    for (i, l) in lambda.iter().enumerate() {
        s[(i, i)] -= l;
    }
    s
}

/// Orthonormal basis (as columns) of the range of a PSD matrix.
fn range_basis(z: &Mat) -> Result<Mat> {
    let e = SymmetricEigen::new(z)?;
    let cutoff = RANK_THRESHOLD * e.max_value().max(0.0);
    let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > cutoff).collect();
    let mut u = Mat::zeros(z.rows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        for r in 0..z.rows() {
            u[(r, c)] = e.vectors[(r, i)];
        }
    }
    Ok(u)
}

fn range_residual(s: &Mat, z: &Mat) -> Result<f64> {
    let u = range_basis(z)?;
    if u.cols() == 0 {
        return Ok(0.0);
    }
    spectral_norm(&s.matmul(&u)?)
}

fn check_truth(truth: &GroundTruth, d: usize) -> Result<()> {
    if truth.dim() != d {
        return Err(Error::DimensionMismatch {
            op: "stationarity",
            expected: (truth.dim(), truth.dim()),
            found: (d, d),
        });
    }
    Ok(())
}

/// Curvature `Tr(Bᵀ D∇_A L(A, λ)[B])` of the Lagrangian along `B`, where
/// `D∇_A L[B] = 2 (H ∘ (ABᵀ + BAᵀ)) A + 2 S B`.
pub fn lagrangian_curvature(a: &Mat, b: &Mat, h: &Mat, s: &Mat) -> Result<f64> {
    let abt = a.matmul_t(b)?;
    let mut dg = abt.add(&abt.transpose())?;
    for (v, hv) in dg.as_mut_slice().iter_mut().zip(h.as_slice()) {
        *v *= hv;
    }
    let dir = dg.matmul(a)?.add(&s.matmul(b)?)?.scale(2.0);
    b.inner(&dir)
}

/// Certificate of the approximate SOSP conditions at `A`.
///
/// Curvature is probed along `probes` random tangent directions (rows of
/// `B` orthogonal to the rows of `A`), drawn from `seed`. When `A` has a
/// nontrivial kernel `Aw = 0`, the directions `B = x wᵀ` with `x` an
/// eigenvector of `S` are tangent too and are always included.
pub fn sosp_residual(
    a: &Mat,
    exp: &HermiteExpansion,
    truth: &GroundTruth,
    probes: usize,
    seed: u64,
) -> Result<StationarityCertificate> {
    let d = a.rows();
    check_truth(truth, d)?;
    let z = a.gram();
    let kernels = EntryKernels::new(exp, &truth.row_norms)?;
    let (g, h) = kernels.grad_and_curvature(&z, &truth.z_star);
    let lambda = fit_multipliers(a, &g)?;
    let s = slack(&g, &lambda);
    let targets = truth.diag_targets();
    let eps_feas = (0..d).map(|i| (z[(i, i)] - targets[i]).abs()).fold(0.0, f64::max);
    let eps_grad = range_residual(&s, &z)?;

    let mut eps_curv = f64::INFINITY;
    let mut rng = seeded_rng(seed);
    let k = a.cols();
    for _ in 0..probes {
        let mut b = Mat::zeros(d, k);
        for v in b.as_mut_slice() {
            *v = StandardNormal.sample(&mut rng);
        }
        tangent_project(a, &mut b);
        let nb = b.frobenius_sq();
        if nb > 1e-24 {
            eps_curv = eps_curv.min(lagrangian_curvature(a, &b, &h, &s)? / nb);
        }
    }
    let row_space = range_basis(&a.transpose().matmul(a)?)?;
    if row_space.cols() < k {
        let kernel = null_directions(&row_space, k);
        let es = SymmetricEigen::new(&s)?;
        for w in &kernel {
            for c in 0..d {
                let mut b = Mat::zeros(d, k);
                for r in 0..d {
                    for (l, wl) in w.iter().enumerate() {
                        b[(r, l)] = es.vectors[(r, c)] * wl;
                    }
                }
                let nb = b.frobenius_sq();
                eps_curv = eps_curv.min(lagrangian_curvature(a, &b, &h, &s)? / nb);
            }
        }
    }
    if !eps_curv.is_finite() {
        eps_curv = 0.0;
    }
    Ok(StationarityCertificate { lambda, s, eps_feas, eps_grad, eps_curv })
}

/// Removes from each row of `b` its component along the matching row of `a`.
pub fn tangent_project(a: &Mat, b: &mut Mat) {
    for i in 0..a.rows() {
        let ai = a.row(i);
        let nn = dot(ai, ai);
        if nn == 0.0 {
            continue;
        }
        let c = dot(b.row(i), ai) / nn;
        for (bv, av) in b.row_mut(i).iter_mut().zip(ai) {
            *bv -= c * av;
        }
    }
}

/// Orthonormal complement of the columns of `basis` in `R^k`.
fn null_directions(basis: &Mat, k: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut span: Vec<Vec<f64>> = (0..basis.cols()).map(|c| basis.col(c)).collect();
    for e in 0..k {
        let mut v = vec![0.0; k];
        v[e] = 1.0;
        for _ in 0..2 {
            for u in &span {
                let c = dot(&v, u);
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= c * y;
                }
            }
        }
        let n = crate::linalg::norm(&v);
        if n > 1e-8 {
            let v: Vec<f64> = v.into_iter().map(|x| x / n).collect();
            span.push(v.clone());
            out.push(v);
        }
        if span.len() == k {
            break;
        }
    }
    out
}

/// Certificate of the approximate FOSP conditions at `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct FospCertificate {
    pub sigma: Vec<f64>,
    pub s: Mat,
    /// `max(‖S U‖₂, max(0, −λ_min(S)))`.
    pub eps: f64,
}

/// Checks the approximate FOSP conditions at a PSD `Z`.
///
/// Multipliers are fitted on any factor `Z = AAᵀ`, which reduces to
/// `σ_i = (GZ)_ii / Z_ii`. `diag_tol` bounds the accepted
/// `max_i |Z_ii − y_i|`.
pub fn fosp_certificate(
    z: &Mat,
    exp: &HermiteExpansion,
    truth: &GroundTruth,
    diag_tol: f64,
) -> Result<FospCertificate> {
    fosp_impl(z, exp, truth, Some(diag_tol))
}

/// FOSP certificate for the problem without diagonal constraints,
/// `min g̃(Z)` over `Z ⪰ 0`. There are no multipliers (`σ = 0`, `S = G`).
/// This is the problem solved by runs that skip the row projection.
pub fn fosp_certificate_unconstrained(z: &Mat, exp: &HermiteExpansion, truth: &GroundTruth) -> Result<FospCertificate> {
    fosp_impl(z, exp, truth, None)
}

fn fosp_impl(z: &Mat, exp: &HermiteExpansion, truth: &GroundTruth, diag_tol: Option<f64>) -> Result<FospCertificate> {
    let d = z.rows();
    check_truth(truth, d)?;
    if z.cols() != d || !z.is_symmetric(1e-10 * z.max_abs().max(1.0)) {
        return Err(Error::InvalidArgument("Z must be square and symmetric"));
    }
    let e = SymmetricEigen::new(z)?;
    if e.min_value() < -1e-8 {
        return Err(Error::NotPsd { min_eigenvalue: e.min_value() });
    }
    let kernels = EntryKernels::new(exp, &truth.row_norms)?;
    let (g, _) = kernels.grad_and_curvature(z, &truth.z_star);
    let sigma = match diag_tol {
        Some(tol) => {
            let targets = truth.diag_targets();
            let violation = (0..d).map(|i| (z[(i, i)] - targets[i]).abs()).fold(0.0, f64::max);
            if violation > tol {
                return Err(Error::Infeasible { violation });
            }
            let gz = g.matmul(z)?;
            (0..d)
                .map(|i| if z[(i, i)] > 0.0 { Ok(gz[(i, i)] / z[(i, i)]) } else { Err(Error::ZeroRow(i)) })
                .collect::<Result<Vec<f64>>>()?
        }
        None => vec![0.0; d],
    };
    let s = slack(&g, &sigma);
    let resid = range_residual(&s, z)?;
    let neg = (-SymmetricEigen::new(&s)?.min_value()).max(0.0);
    Ok(FospCertificate { sigma, s, eps: resid.max(neg) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryBound {
    /// `‖Z − Z*‖_F`.
    pub lhs: f64,
    /// `ε / σ₁⁴`.
    pub rhs: f64,
    pub holds: bool,
    /// `√r · ε / σ₁⁴` with `r = rank(Z − Z*)`.
    ///
    /// `⟨S, Z − Z*⟩ ≤ ‖S‖₂ ‖Z − Z*‖_*` pairs the spectral norm with the
    /// nuclear norm, so this is the constant that follows for full-rank `Z`.
    /// `rhs` is the rank-one case.
    pub rhs_rank_adjusted: f64,
    pub holds_rank_adjusted: bool,
}

/// Compares the recovery error of an `ε`-FOSP with `ε / σ₁⁴`.
pub fn recovery_bound_check(z: &Mat, eps: f64, sigma1: f64, truth: &GroundTruth) -> Result<RecoveryBound> {
    if sigma1 == 0.0 {
        return Err(Error::InvalidArgument("sigma1 must be nonzero"));
    }
    let delta = z.sub(&truth.z_star)?;
    let lhs = delta.frobenius();
    let rhs = eps / crate::math::powi(sigma1, 4);
    let e = SymmetricEigen::new(&delta)?;
    let top = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank = e.values.iter().filter(|v| v.abs() > RANK_THRESHOLD * top.max(f64::MIN_POSITIVE)).count();
    let rhs_rank_adjusted = rhs * crate::math::sqrt(rank.max(1) as f64);
    Ok(RecoveryBound {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_TOLERANCE,
        rhs_rank_adjusted,
        holds_rank_adjusted: lhs <= rhs_rank_adjusted + BOUND_TOLERANCE,
    })
}

/// Sign-change intervals `[lo, hi]` of `f` on a uniform grid over `[−1, 1]`.
///
/// Grid points where `f` vanishes are skipped, so a root on a grid point is
/// reported once, bracketed by its nonzero neighbours.
pub fn sign_change_intervals(f: impl Fn(f64) -> f64, grid_size: usize) -> Vec<(f64, f64)> {
    let n = grid_size.max(2);
    let step = 2.0 / (n - 1) as f64;
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for i in 0..n {
        let x = if i == n - 1 { 1.0 } else { -1.0 + i as f64 * step };
        let v = f(x);
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if let Some((lx, lv)) = last {
            if (lv < 0.0) != (v < 0.0) {
                out.push((lx, x));
            }
        }
        last = Some((x, v));
    }
    out
}

/// Root intervals of the scalar loss derivative `z ↦ g̃'(z; z*)`.
pub fn scalar_stationary_scan(exp: &HermiteExpansion, z_star: f64, grid_size: usize) -> Vec<(f64, f64)> {
    sign_change_intervals(|z| scalar_loss_derivative(exp, z_star, z), grid_size)
}

/// Random feasible `A`: rows uniform on spheres of radius `truth.row_norms`.
pub fn random_feasible<R: Rng + ?Sized>(truth: &GroundTruth, k: usize, rng: &mut R) -> Mat {
    crate::optimizer::initial_params(&truth.row_norms, k, crate::optimizer::Init::Sphere, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::expand_activation;
    use crate::model::ActivationSpec;

    fn tanh() -> HermiteExpansion {
        expand_activation(&ActivationSpec::tanh(), 21, 200).unwrap()
    }

    fn truth(seed: u64, d: usize) -> GroundTruth {
        GroundTruth::random_unit_rows(d, d, &mut seeded_rng(seed))
    }

    #[test]
    fn multiplier_examples() {
        let a = Mat::from_rows(&[&[2.0, 0.0], &[0.0, -1.0]]).unwrap();
        let g = Mat::from_diag(&[0.7, -0.4]);
        assert_eq!(fit_multipliers(&a, &g).unwrap(), vec![0.7, -0.4]);
        assert_eq!(fit_multipliers(&a, &Mat::zeros(2, 2)).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(fit_multipliers(&Mat::zeros(2, 2), &g), Err(Error::ZeroRow(0))));
    }

    #[test]
    fn multipliers_are_least_squares() {
        let mut rng = seeded_rng(1);
        let t = truth(1, 3);
        let a = random_feasible(&t, 3, &mut rng);
        let g = Mat::from_rows(&[&[0.3, -0.1, 0.2], &[-0.1, 0.5, 0.0], &[0.2, 0.0, -0.4]]).unwrap();
        let lam = fit_multipliers(&a, &g).unwrap();
        let resid = |l: &[f64]| slack(&g, l).matmul(&a).unwrap().frobenius();
        let best = resid(&lam);
        for _ in 0..20 {
            let p: Vec<f64> = lam.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
            assert!(resid(&p) >= best);
        }
    }

    #[test]
    fn optimum_is_exact_sosp_and_fosp() {
        let exp = tanh();
        let t = truth(2, 3);
        let c = sosp_residual(&t.a_star, &exp, &t, 64, 0).unwrap();
        assert!(c.eps_grad <= 1e-8 && c.eps_feas <= 1e-8 && c.eps_curv >= -1e-6, "{c:?}");
        let f = fosp_certificate(&t.z_star, &exp, &t, 1e-8).unwrap();
        assert!(f.eps <= 1e-8);
        let b = recovery_bound_check(&t.z_star, 0.0, exp.sigma(1), &t).unwrap();
        assert_eq!((b.lhs, b.rhs, b.holds), (0.0, 0.0, true));
    }

    #[test]
    fn random_point_is_not_stationary() {
        let exp = tanh();
        let t = truth(3, 3);
        let a = random_feasible(&t, 3, &mut seeded_rng(4));
        let c = sosp_residual(&a, &exp, &t, 16, 0).unwrap();
        assert!(c.eps_grad > 0.01, "{}", c.eps_grad);
        assert!(c.s.is_symmetric(0.0));
    }

    #[test]
    fn curvature_matches_lagrangian_finite_differences() {
        let exp = tanh();
        let t = truth(5, 3);
        let a = random_feasible(&t, 3, &mut seeded_rng(6));
        let kernels = EntryKernels::new(&exp, &t.row_norms).unwrap();
        let (g, h) = kernels.grad_and_curvature(&a.gram(), &t.z_star);
        let lam = fit_multipliers(&a, &g).unwrap();
        let s = slack(&g, &lam);
        let grad_l = |x: &Mat| {
            let (gx, _) = kernels.grad_and_curvature(&x.gram(), &t.z_star);
            slack(&gx, &lam).matmul(x).unwrap().scale(2.0)
        };
        let mut b = Mat::from_rows(&[&[0.3, -0.2, 0.5], &[0.1, 0.4, -0.3], &[-0.6, 0.2, 0.1]]).unwrap();
        tangent_project(&a, &mut b);
        let step = 1e-5;
        let mut ap = a.clone();
        ap.axpy(step, &b).unwrap();
        let mut am = a.clone();
        am.axpy(-step, &b).unwrap();
        let fd = b.inner(&grad_l(&ap).sub(&grad_l(&am)).unwrap()).unwrap() / (2.0 * step);
        let an = lagrangian_curvature(&a, &b, &h, &s).unwrap();
        assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-3), "{fd} vs {an}");
    }

    #[test]
    fn gradient_of_entry_loss_matches_finite_differences() {
        let exp = expand_activation(&ActivationSpec::sigmoid(), 21, 200).unwrap();
        let t = GroundTruth::new(Mat::from_rows(&[&[1.2, 0.0], &[0.3, 0.6], &[-0.5, 0.5]]).unwrap());
        let kernels = EntryKernels::new(&exp, &t.row_norms).unwrap();
        let a = random_feasible(&t, 2, &mut seeded_rng(7));
        let z = a.gram();
        let (g, _) = kernels.grad_and_curvature(&z, &t.z_star);
        let h = 1e-6;
        for (j, l) in [(0, 1), (1, 2), (0, 2)] {
            let mut zp = z.clone();
            zp[(j, l)] += h;
            zp[(l, j)] += h;
            let mut zm = z.clone();
            zm[(j, l)] -= h;
            zm[(l, j)] -= h;
            let fd = (kernels.loss(&zp, &t.z_star) - kernels.loss(&zm, &t.z_star)) / (2.0 * h);
            assert!((fd - 2.0 * g[(j, l)]).abs() < 1e-7);
        }
    }

    #[test]
    fn fosp_rejects_bad_input() {
        let exp = tanh();
        let t = truth(8, 2);
        let not_psd = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(fosp_certificate(&not_psd, &exp, &t, 1e-8), Err(Error::NotPsd { .. })));
        let off = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(fosp_certificate(&off, &exp, &t, 1e-8), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn sosp_to_fosp_transfer_rank_deficient() {
        let exp = tanh();
        let t = truth(9, 3);
        let mut rng = seeded_rng(10);
        for _ in 0..10 {
            // k = 4 > d leaves a kernel direction
            let a = random_feasible(&t, 4, &mut rng);
            let c = sosp_residual(&a, &exp, &t, 8, 1).unwrap();
            let f = fosp_certificate(&a.gram(), &exp, &t, 1e-8).unwrap();
            assert!(f.eps <= c.max_eps() + 1e-6);
        }
    }

    #[test]
    fn scans() {
        let id = expand_activation(&ActivationSpec::identity(), 5, 200).unwrap();
        let r = scalar_stationary_scan(&id, 0.4, 10_000);
        assert_eq!(r.len(), 1);
        assert!(r[0].0 <= 0.4 && 0.4 <= r[0].1);
        let on_grid = sign_change_intervals(|x| x, 3);
        assert_eq!(on_grid, vec![(-1.0, 1.0)]);
    }
}
