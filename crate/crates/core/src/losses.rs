//! Objectives of the two training stages and their derivatives.
//!
//! Stage 1 pits the generator against a (rectified) linear discriminator
//! `v`, regularised by `−‖v‖²/2`. Stage 2 uses a quadratic discriminator
//! `xᵀVx`, regularised by `−‖V‖_F²/2`; maximising over `V` exactly leaves
//! `g̃_{m,n}(A) = ½‖X_n − S̄(A)‖_F²`, where `X_n` is the observed second
//! moment and `S̄` the second moment of a generator batch.
//!
//! Batches are `d × m` matrices whose columns are samples.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hermite::{HermiteExpansion, ScaledKernel};
use crate::linalg::Mat;
use crate::model::{ActivationSpec, GroundTruth};

fn require(cond: bool, op: &'static str, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { op, expected, found })
    }
}

/// Observed second moment `X_n = (1/n) Σ x_i x_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCov {
    pub x_n: Mat,
    pub n: usize,
}

/// Generator batch second moment `S̄ = (1/m) Σ_j φ(Az_j) φ(Az_j)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSecondMoment {
    pub s_bar: Mat,
    pub m: usize,
}

pub fn empirical_cov(samples: &Mat) -> Result<EmpiricalCov> {
    let n = samples.cols();
    if n == 0 {
        return Err(Error::InvalidArgument("empirical covariance needs at least one sample"));
    }
    Ok(EmpiricalCov { x_n: samples.gram().scale(1.0 / n as f64), n })
}

/// Pre-activations, outputs and derivatives of a generator batch.
struct Forward {
    s: Mat,
    dphi: Mat,
    ddphi: Option<Mat>,
}

fn forward(a: &Mat, z: &Mat, act: &ActivationSpec, second: bool) -> Result<Forward> {
    require(z.rows() == a.cols(), "generator batch", (a.cols(), z.cols()), z.shape())?;
    if z.cols() == 0 {
        return Err(Error::InvalidArgument("generator batch must be nonempty"));
    }
    let y = a.matmul(z)?;
    let mut s = Mat::zeros(y.rows(), y.cols());
    let mut dphi = Mat::zeros(y.rows(), y.cols());
    let mut ddphi = if second { Some(Mat::zeros(y.rows(), y.cols())) } else { None };
    for (idx, &yv) in y.as_slice().iter().enumerate() {
        if let Some(dd) = ddphi.as_mut() {
            let (v, d1, d2) = act.eval3(yv);
            s.as_mut_slice()[idx] = v;
            dphi.as_mut_slice()[idx] = d1;
            dd.as_mut_slice()[idx] = d2;
        } else {
            let (v, d1) = act.eval2(yv);
            s.as_mut_slice()[idx] = v;
            dphi.as_mut_slice()[idx] = d1;
        }
    }
    Ok(Forward { s, dphi, ddphi })
}

fn check_cov(a: &Mat, cov: &EmpiricalCov) -> Result<()> {
    let d = a.rows();
    require(cov.x_n.shape() == (d, d), "empirical covariance", (d, d), cov.x_n.shape())
}

pub fn batch_second_moment(a: &Mat, z: &Mat, act: &ActivationSpec) -> Result<BatchSecondMoment> {
    let f = forward(a, z, act, false)?;
    let m = z.cols();
    Ok(BatchSecondMoment { s_bar: f.s.gram().scale(1.0 / m as f64), m })
}

/// `g̃_{m,n}(A) = ½‖X_n − S̄(A)‖_F²`.
pub fn g_tilde_mn(a: &Mat, cov: &EmpiricalCov, z: &Mat, act: &ActivationSpec) -> Result<f64> {
    check_cov(a, cov)?;
    let sb = batch_second_moment(a, z, act)?;
    Ok(0.5 * cov.x_n.sub(&sb.s_bar)?.frobenius_sq())
}

/// Maximiser `V* = S̄ − X_n` of `⟨S̄ − X_n, V⟩ − ½‖V‖_F²`.
pub fn optimal_v(s_bar: &BatchSecondMoment, cov: &EmpiricalCov) -> Result<Mat> {
    s_bar.s_bar.sub(&cov.x_n)
}

/// Regularised quadratic game value `⟨S̄ − X_n, V⟩ − ½‖V‖_F²`.
///
/// Only the symmetric part of `V` enters, since both moments are symmetric.
pub fn quad_game_value(v: &Mat, s_bar: &BatchSecondMoment, cov: &EmpiricalCov) -> Result<f64> {
    let r = s_bar.s_bar.sub(&cov.x_n)?;
    let vs = v.symmetrize();
    Ok(r.inner(&vs)? - 0.5 * vs.frobenius_sq())
}

/// Gradient of the game value in `V`: `(S̄ − X_n) − V`.
pub fn quad_game_grad_v(v: &Mat, s_bar: &BatchSecondMoment, cov: &EmpiricalCov) -> Result<Mat> {
    s_bar.s_bar.sub(&cov.x_n)?.sub(&v.symmetrize())
}

/// Value, gradient and batch moment of `g̃_{m,n}` in one pass.
#[derive(Debug, Clone)]
pub struct Stage2Eval {
    pub value: f64,
    pub grad: Mat,
    pub s_bar: BatchSecondMoment,
}

/// Evaluates `g̃_{m,n}` and `∇_A g̃_{m,n} = (2/m) Σ_j diag(φ'(Az_j)) R φ(Az_j) z_jᵀ`
/// with `R = S̄ − X_n`.
pub fn stage2_value_grad(a: &Mat, cov: &EmpiricalCov, z: &Mat, act: &ActivationSpec) -> Result<Stage2Eval> {
    check_cov(a, cov)?;
    let f = forward(a, z, act, false)?;
    let m = z.cols() as f64;
    let s_bar = f.s.gram().scale(1.0 / m);
    let r = s_bar.sub(&cov.x_n)?;
    let value = 0.5 * r.frobenius_sq();
    let mut t = r.matmul(&f.s)?;
    for (tv, dv) in t.as_mut_slice().iter_mut().zip(f.dphi.as_slice()) {
        *tv *= dv;
    }
    let grad = t.matmul_t(z)?.scale(2.0 / m);
    Ok(Stage2Eval { value, grad, s_bar: BatchSecondMoment { s_bar, m: z.cols() } })
}

pub fn grad_a_empirical(a: &Mat, cov: &EmpiricalCov, z: &Mat, act: &ActivationSpec) -> Result<Mat> {
    Ok(stage2_value_grad(a, cov, z, act)?.grad)
}

/// Directional derivative of [`grad_a_empirical`] along `B`.
///
/// With `u_j = φ'(Az_j) ∘ Bz_j` and `δS̄ = (1/m) Σ (u_j s_jᵀ + s_j u_jᵀ)`:
/// `(2/m) Σ_j [φ''(Az_j)∘Bz_j∘(R s_j) + φ'(Az_j)∘(R u_j) + φ'(Az_j)∘(δS̄ s_j)] z_jᵀ`.
/// The last term comes from the residual moving with `A`.
pub fn hvp_empirical(a: &Mat, b: &Mat, cov: &EmpiricalCov, z: &Mat, act: &ActivationSpec) -> Result<Mat> {
    check_cov(a, cov)?;
    require(b.shape() == a.shape(), "hvp direction", a.shape(), b.shape())?;
    let f = forward(a, z, act, true)?;
    let ddphi = f.ddphi.expect("second derivatives requested");
    let m = z.cols() as f64;
    let w = b.matmul(z)?;
    let mut u = w.clone();
    for (uv, dv) in u.as_mut_slice().iter_mut().zip(f.dphi.as_slice()) {
        *uv *= dv;
    }
    let r = f.s.gram().scale(1.0 / m).sub(&cov.x_n)?;
    let us = u.matmul_t(&f.s)?;
    let ds = us.add(&us.transpose())?.scale(1.0 / m);
    let rs = r.matmul(&f.s)?;
    let ru = r.matmul(&u)?;
    let dss = ds.matmul(&f.s)?;
    let mut t = Mat::zeros(a.rows(), z.cols());
    for idx in 0..t.as_slice().len() {
        let term1 = ddphi.as_slice()[idx] * w.as_slice()[idx] * rs.as_slice()[idx];
        let term23 = f.dphi.as_slice()[idx] * (ru.as_slice()[idx] + dss.as_slice()[idx]);
        t.as_mut_slice()[idx] = term1 + term23;
    }
    Ok(t.matmul_t(z)?.scale(2.0 / m))
}

/// Per-coordinate means of the first-moment feature over a batch.
pub fn feature_means(samples: &Mat, act: &ActivationSpec) -> Vec<f64> {
    let n = samples.cols().max(1) as f64;
    (0..samples.rows())
        .map(|i| samples.row(i).iter().map(|&x| act.marginal_feature(x)).sum::<f64>() / n)
        .collect()
}

/// Stage-1 objective value and gradients.
#[derive(Debug, Clone)]
pub struct Stage1Eval {
    pub value: f64,
    pub grad_a: Mat,
    pub grad_v: Vec<f64>,
    /// Feature means of the generator batch.
    pub gen_means: Vec<f64>,
}

/// Stage-1 objective `vᵀ(μ_obs − μ_gen(A)) − ½‖v‖²`.
///
/// `μ` are the per-coordinate means of the feature `ψ = R(φ − C)` for
/// odd-plus-constant activations (a plain linear discriminator sees nothing
/// there), and of `ψ = φ` otherwise.
pub fn f1_value_grad(
    a: &Mat,
    v: &[f64],
    samples: &Mat,
    z: &Mat,
    act: &ActivationSpec,
) -> Result<Stage1Eval> {
    let d = a.rows();
    require(v.len() == d, "stage-1 discriminator", (d, 1), (v.len(), 1))?;
    require(samples.rows() == d, "stage-1 samples", (d, samples.cols()), samples.shape())?;
    require(z.rows() == a.cols(), "stage-1 latent batch", (a.cols(), z.cols()), z.shape())?;
    if z.cols() == 0 || samples.cols() == 0 {
        return Err(Error::InvalidArgument("stage-1 batches must be nonempty"));
    }
    let obs = feature_means(samples, act);
    let y = a.matmul(z)?;
    let m = z.cols() as f64;
    let mut gen_means = vec![0.0; d];
    let mut dpsi = Mat::zeros(d, z.cols());
    for i in 0..d {
        let mut acc = 0.0;
        for (j, &yv) in y.row(i).iter().enumerate() {
            let (p, dp) = act.marginal_feature_of_preactivation(yv);
            acc += p;
            dpsi[(i, j)] = dp;
        }
        gen_means[i] = acc / m;
    }
    let gap: Vec<f64> = obs.iter().zip(&gen_means).map(|(o, g)| o - g).collect();
    let value = crate::linalg::dot(v, &gap) - 0.5 * crate::linalg::dot(v, v);
    let grad_v = gap.iter().zip(v).map(|(g, vi)| g - vi).collect();
    let mut grad_a = dpsi.matmul_t(z)?;
    for i in 0..d {
        let s = -v[i] / m;
        for g in grad_a.row_mut(i) {
            *g *= s;
        }
    }
    Ok(Stage1Eval { value, grad_a, grad_v, gen_means })
}

fn all_unit(norms: &[f64]) -> bool {
    norms.iter().all(|n| (n - 1.0).abs() <= 1e-12)
}

/// Kernel matrix `E[φ(Az) φ(Az)ᵀ]` from the Hermite expansion.
///
/// Unit rows use the dual kernel of the cosine; other rows go through the
/// scaled kernel with the row norms as scales.
pub fn population_moment(a: &Mat, exp: &HermiteExpansion) -> Mat {
    let d = a.rows();
    let norms = a.row_norms();
    let g = a.gram();
    let mut out = Mat::zeros(d, d);
    if all_unit(&norms) {
        let k = ScaledKernel::unit(exp);
        for j in 0..d {
            for l in j..d {
                let v = k.value(g[(j, l)].clamp(-1.0, 1.0));
                out[(j, l)] = v;
                out[(l, j)] = v;
            }
        }
        return out;
    }
    for j in 0..d {
        for l in j..d {
            let k = ScaledKernel::new(exp, norms[j], norms[l]);
            let denom = norms[j] * norms[l];
            let rho = if denom > 0.0 { (g[(j, l)] / denom).clamp(-1.0, 1.0) } else { 0.0 };
            let v = k.value(rho);
            out[(j, l)] = v;
            out[(l, j)] = v;
        }
    }
    out
}

/// Population risk `g(A) = ½‖E[x xᵀ] − E[φ(Az) φ(Az)ᵀ]‖_F²` in closed form.
pub fn population_risk(a: &Mat, truth: &GroundTruth, exp: &HermiteExpansion) -> Result<f64> {
    let d = truth.dim();
    require(a.rows() == d, "population risk", (d, a.cols()), a.shape())?;
    let target = population_moment(&truth.a_star, exp);
    let model = population_moment(a, exp);
    Ok(0.5 * target.sub(&model)?.frobenius_sq())
}

/// Derivative of the per-entry loss `½(K(z) − K(z*))²`:
/// `(Σ σ_i²(zⁱ − z*ⁱ)) · (Σ i σ_i² z^{i−1})`.
pub fn scalar_loss_derivative(exp: &HermiteExpansion, z_star: f64, z: f64) -> f64 {
    let k = ScaledKernel::unit(exp);
    (k.value(z) - k.value(z_star)) * k.deriv(z)
}

/// Leaky-ReLU form of [`scalar_loss_derivative`]:
/// `((1−α)²(h(z) − h(z*)) + α(z − z*)) · ((1−α)² h'(z) + α)`, with `h` the
/// dual kernel of plain ReLU taken from `relu`.
pub fn leaky_scalar_loss_derivative(relu: &HermiteExpansion, alpha: f64, z_star: f64, z: f64) -> f64 {
    let h = ScaledKernel::unit(relu);
    let c = (1.0 - alpha) * (1.0 - alpha);
    (c * (h.value(z) - h.value(z_star)) + alpha * (z - z_star)) * (c * h.deriv(z) + alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{dual_kernel, expand_activation};
    use crate::model::sample_latent;
    use crate::seeded_rng;
    use rand::Rng;

    fn random_mat(r: usize, c: usize, rng: &mut crate::SeededRng) -> Mat {
        let mut m = Mat::zeros(r, c);
        for v in m.as_mut_slice() {
            *v = rng.random_range(-1.0..1.0);
        }
        m
    }

    #[test]
    fn empirical_cov_examples() {
        let e1 = Mat::from_rows(&[&[1.0], &[0.0]]).unwrap();
        assert_eq!(empirical_cov(&e1).unwrap().x_n, Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap());
        let pm = Mat::from_rows(&[&[1.0, -1.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(empirical_cov(&pm).unwrap().x_n, Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap());
        assert!(empirical_cov(&Mat::zeros(2, 0)).is_err());
    }

    #[test]
    fn g_tilde_zero_generator() {
        let mut rng = seeded_rng(3);
        let x = random_mat(3, 7, &mut rng);
        let cov = empirical_cov(&x).unwrap();
        let z = sample_latent(2, 11, &mut rng);
        let g = g_tilde_mn(&Mat::zeros(3, 2), &cov, &z, &ActivationSpec::tanh()).unwrap();
        assert!((g - 0.5 * cov.x_n.frobenius_sq()).abs() < 1e-15);
    }

    #[test]
    fn g_tilde_naive_loop() {
        let mut rng = seeded_rng(4);
        let act = ActivationSpec::tanh();
        let a = random_mat(2, 1, &mut rng);
        let x = random_mat(2, 9, &mut rng);
        let z = sample_latent(1, 13, &mut rng);
        let cov = empirical_cov(&x).unwrap();
        let mut total = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                let mut s = 0.0;
                for j in 0..13 {
                    s += act.value(a[(p, 0)] * z[(0, j)]) * act.value(a[(q, 0)] * z[(0, j)]);
                }
                let mut xx = 0.0;
                for i in 0..9 {
                    xx += x[(p, i)] * x[(q, i)];
                }
                let diff = xx / 9.0 - s / 13.0;
                total += diff * diff;
            }
        }
        let g = g_tilde_mn(&a, &cov, &z, &act).unwrap();
        assert!((g - 0.5 * total).abs() < 1e-14);
    }

    #[test]
    fn optimal_v_maximises_game() {
        let mut rng = seeded_rng(5);
        let act = ActivationSpec::sigmoid();
        let a = random_mat(3, 2, &mut rng);
        let cov = empirical_cov(&random_mat(3, 10, &mut rng)).unwrap();
        let z = sample_latent(2, 20, &mut rng);
        let sb = batch_second_moment(&a, &z, &act).unwrap();
        let vstar = optimal_v(&sb, &cov).unwrap();
        let best = quad_game_value(&vstar, &sb, &cov).unwrap();
        for _ in 0..20 {
            let v = random_mat(3, 3, &mut rng).symmetrize();
            assert!(quad_game_value(&v, &sb, &cov).unwrap() <= best);
        }
        // one unit ascent step from zero lands on the maximiser
        let step = quad_game_grad_v(&Mat::zeros(3, 3), &sb, &cov).unwrap();
        assert!(step.sub(&vstar).unwrap().max_abs() < 1e-15);
        let same = BatchSecondMoment { s_bar: cov.x_n.clone(), m: 1 };
        assert_eq!(optimal_v(&same, &cov).unwrap().max_abs(), 0.0);
        assert!((best - g_tilde_mn(&a, &cov, &z, &act).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn gradient_vanishes_on_matched_batch() {
        let mut rng = seeded_rng(6);
        let act = ActivationSpec::tanh();
        let a = random_mat(3, 2, &mut rng);
        let z = sample_latent(2, 8, &mut rng);
        let s = crate::model::generate(&a, &z, &act).unwrap();
        let cov = empirical_cov(&s).unwrap();
        assert!(grad_a_empirical(&a, &cov, &z, &act).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn linear_gradient_closed_form() {
        // With an orthogonal latent batch (Σ z zᵀ = m I) and φ = id,
        // S̄ = AAᵀ and the gradient is 2(AAᵀ − X_n)A.
        let act = ActivationSpec::identity();
        let a = Mat::from_rows(&[&[0.6, -0.8], &[0.8, 0.6]]).unwrap();
        let z = Mat::from_rows(&[&[1.0, -1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, -1.0]]).unwrap().scale(2f64.sqrt());
        let x = Mat::from_rows(&[&[1.0, 0.3, -0.2], &[0.5, -1.0, 0.4]]).unwrap();
        let cov = empirical_cov(&x).unwrap();
        let g = grad_a_empirical(&a, &cov, &z, &act).unwrap();
        let expected = a.gram().sub(&cov.x_n).unwrap().matmul(&a).unwrap().scale(2.0);
        assert!(g.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn gradient_and_hvp_match_finite_differences() {
        let mut rng = seeded_rng(7);
        for act in [ActivationSpec::tanh(), ActivationSpec::sigmoid()] {
            let a = random_mat(3, 2, &mut rng);
            let b = random_mat(3, 2, &mut rng);
            let cov = empirical_cov(&random_mat(3, 6, &mut rng)).unwrap();
            let z = sample_latent(2, 5, &mut rng);
            let g = grad_a_empirical(&a, &cov, &z, &act).unwrap();
            let h = 1e-6;
            for idx in 0..6 {
                let mut ap = a.clone();
                ap.as_mut_slice()[idx] += h;
                let mut am = a.clone();
                am.as_mut_slice()[idx] -= h;
                let fd = (g_tilde_mn(&ap, &cov, &z, &act).unwrap() - g_tilde_mn(&am, &cov, &z, &act).unwrap())
                    / (2.0 * h);
                assert!((fd - g.as_slice()[idx]).abs() <= 1e-5 * g.max_abs());
            }
            let t = 1e-4;
            let mut ap = a.clone();
            ap.axpy(t, &b).unwrap();
            let mut am = a.clone();
            am.axpy(-t, &b).unwrap();
            let fd = grad_a_empirical(&ap, &cov, &z, &act)
                .unwrap()
                .sub(&grad_a_empirical(&am, &cov, &z, &act).unwrap())
                .unwrap()
                .scale(0.5 / t);
            let hv = hvp_empirical(&a, &b, &cov, &z, &act).unwrap();
            assert!(fd.sub(&hv).unwrap().frobenius() <= 1e-4 * hv.frobenius());
            assert_eq!(hvp_empirical(&a, &Mat::zeros(3, 2), &cov, &z, &act).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn hvp_is_symmetric() {
        let mut rng = seeded_rng(8);
        let act = ActivationSpec::tanh();
        let a = random_mat(4, 3, &mut rng);
        let cov = empirical_cov(&random_mat(4, 9, &mut rng)).unwrap();
        let z = sample_latent(3, 7, &mut rng);
        let b1 = random_mat(4, 3, &mut rng);
        let b2 = random_mat(4, 3, &mut rng);
        let l = b1.inner(&hvp_empirical(&a, &b2, &cov, &z, &act).unwrap()).unwrap();
        let r = b2.inner(&hvp_empirical(&a, &b1, &cov, &z, &act).unwrap()).unwrap();
        assert!((l - r).abs() < 1e-8);
    }

    #[test]
    fn stage1_examples() {
        let mut rng = seeded_rng(9);
        let act = ActivationSpec::sigmoid();
        let a = random_mat(3, 2, &mut rng);
        let x = random_mat(3, 12, &mut rng).map(|v| v + 0.5);
        let z = sample_latent(2, 10, &mut rng);
        let zero = f1_value_grad(&a, &[0.0; 3], &x, &z, &act).unwrap();
        assert_eq!(zero.value, 0.0);
        assert_eq!(zero.grad_a.max_abs(), 0.0);
        // observations equal to the generator batch itself
        let own = crate::model::generate(&a, &z, &act).unwrap();
        let v = [0.3, -0.2, 1.1];
        let e = f1_value_grad(&a, &v, &own, &z, &act).unwrap();
        for (g, vi) in e.grad_v.iter().zip(&v) {
            assert!((g + vi).abs() < 1e-15);
        }
    }

    #[test]
    fn stage1_gradients_match_finite_differences() {
        let mut rng = seeded_rng(10);
        for act in [ActivationSpec::sigmoid(), ActivationSpec::leaky_relu(0.2).unwrap()] {
            let a = random_mat(3, 2, &mut rng);
            let x = random_mat(3, 15, &mut rng);
            let z = sample_latent(2, 9, &mut rng);
            let v = [0.4, -0.7, 0.9];
            let e = f1_value_grad(&a, &v, &x, &z, &act).unwrap();
            let h = 1e-7;
            for idx in 0..6 {
                let mut ap = a.clone();
                ap.as_mut_slice()[idx] += h;
                let mut am = a.clone();
                am.as_mut_slice()[idx] -= h;
                let fd = (f1_value_grad(&ap, &v, &x, &z, &act).unwrap().value
                    - f1_value_grad(&am, &v, &x, &z, &act).unwrap().value)
                    / (2.0 * h);
                assert!((fd - e.grad_a.as_slice()[idx]).abs() <= 1e-5 * e.grad_a.max_abs().max(1e-3));
            }
            for i in 0..3 {
                let mut vp = v;
                vp[i] += h;
                let mut vm = v;
                vm[i] -= h;
                let fd = (f1_value_grad(&a, &vp, &x, &z, &act).unwrap().value
                    - f1_value_grad(&a, &vm, &x, &z, &act).unwrap().value)
                    / (2.0 * h);
                assert!((fd - e.grad_v[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn population_risk_paths() {
        let exp = expand_activation(&ActivationSpec::tanh(), 21, 200).unwrap();
        let mut rng = seeded_rng(11);
        let truth = GroundTruth::random_unit_rows(3, 3, &mut rng);
        assert!(population_risk(&truth.a_star, &truth, &exp).unwrap() < 1e-20);
        // column permutation and sign flips leave AAᵀ unchanged
        let mut perm = Mat::zeros(3, 3);
        for i in 0..3 {
            perm[(i, 0)] = -truth.a_star[(i, 2)];
            perm[(i, 1)] = truth.a_star[(i, 0)];
            perm[(i, 2)] = truth.a_star[(i, 1)];
        }
        assert!(population_risk(&perm, &truth, &exp).unwrap() < 1e-10);

        // d=2, k=1 scalar formula
        let (r, rs) = (0.3f64, 0.8f64);
        let a = Mat::from_rows(&[&[1.0, 0.0], &[r, (1.0 - r * r).sqrt()]]).unwrap();
        let t = GroundTruth::new(Mat::from_rows(&[&[1.0, 0.0], &[rs, (1.0 - rs * rs).sqrt()]]).unwrap());
        let diff = dual_kernel(&exp, r) - dual_kernel(&exp, rs);
        let g = population_risk(&a, &t, &exp).unwrap();
        assert!((g - diff * diff).abs() < 1e-14);
    }

    #[test]
    fn population_risk_separable_and_paths_agree() {
        let exp = expand_activation(&ActivationSpec::sigmoid(), 21, 200).unwrap();
        let mut rng = seeded_rng(12);
        let truth = GroundTruth::random_unit_rows(4, 3, &mut rng);
        let a = GroundTruth::random_unit_rows(4, 3, &mut rng).a_star;
        let g = population_risk(&a, &truth, &exp).unwrap();
        let (z, zs) = (a.gram(), truth.z_star.clone());
        let mut sep = 0.0;
        for j in 0..4 {
            for l in 0..4 {
                let d = dual_kernel(&exp, z[(j, l)]) - dual_kernel(&exp, zs[(j, l)]);
                sep += 0.5 * d * d;
            }
        }
        assert!((g - sep).abs() < 1e-10);
        // the scaled kernel at unit scales reproduces the Hadamard-power path
        let mut general = 0.0;
        for j in 0..4 {
            for l in 0..4 {
                let k = ScaledKernel::new(&exp, 1.0, 1.0);
                let d = k.value(z[(j, l)]) - k.value(zs[(j, l)]);
                general += 0.5 * d * d;
            }
        }
        assert!((g - general).abs() < 1e-10);
    }

    #[test]
    fn scalar_derivative_examples() {
        let id = expand_activation(&ActivationSpec::identity(), 5, 200).unwrap();
        for (zs, z) in [(0.3, -0.2), (-0.5, 0.9), (0.0, 0.0)] {
            assert!((scalar_loss_derivative(&id, zs, z) - (z - zs)).abs() < 1e-12);
        }
        let tanh = expand_activation(&ActivationSpec::tanh(), 21, 200).unwrap();
        assert_eq!(scalar_loss_derivative(&tanh, 0.4, 0.4), 0.0);
    }

    #[test]
    fn leaky_closed_form_matches_generic() {
        let alpha = 0.2;
        let relu = expand_activation(&ActivationSpec::relu(), 21, 200).unwrap();
        let leaky = expand_activation(&ActivationSpec::leaky_relu(alpha).unwrap(), 21, 200).unwrap();
        for zs in [-0.8, 0.0, 0.5] {
            for i in 0..41 {
                let z = -1.0 + 0.05 * i as f64;
                let a = leaky_scalar_loss_derivative(&relu, alpha, zs, z);
                let b = scalar_loss_derivative(&leaky, zs, z);
                assert!((a - b).abs() < 1e-13, "z*={zs} z={z}: {a} vs {b}");
            }
        }
    }
}
