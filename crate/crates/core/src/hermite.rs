//! Orthonormal Hermite expansions and the Gaussian kernels built from them.
//!
//! `h_n` denotes the probabilists' Hermite polynomial `He_n` scaled by
//! `1/√(n!)`, so that `E[h_m(x) h_n(x)] = δ_mn` for `x ~ N(0, 1)`. An
//! activation is written `φ = Σ σ_i h_i` and, for unit vectors `u, v`,
//! `E[φ(uᵀz) φ(vᵀz)] = Σ σ_i² (uᵀv)^i`.
//!
//! For rows of non-unit norm the multiplication theorem
//! `He_n(αx) = Σ_i η_α^{n,i} He_{n−2i}(x)` rewrites `φ(αx)` in the same
//! basis. [`mult_coeff`] returns `η` for the monic basis; the orthonormal
//! basis picks up the bridge factor `√((n−2i)!/n!)`, see
//! [`normalized_mult_coeff`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{ActivationKind, ActivationSpec};

/// Default truncation degree of activation expansions.
pub const DEFAULT_DEGREE: usize = 21;
/// Default number of Gauss–Hermite nodes.
pub const DEFAULT_NODES: usize = 200;
/// Largest degree accepted by [`expand_activation`].
pub const MAX_DEGREE: usize = 150;

/// Orthonormal Hermite polynomial `h_n(x)` by three-term recurrence.
pub fn basis_eval(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..n {
        let next = (x * cur - math::sqrt(j as f64) * prev) / math::sqrt((j + 1) as f64);
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[j] = h_j(x)` for `j < out.len()`.
pub fn basis_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for j in 1..out.len().saturating_sub(1) {
        out[j + 1] = (x * out[j] - math::sqrt(j as f64) * out[j - 1]) / math::sqrt((j + 1) as f64);
    }
}

/// Gauss–Hermite rule for expectations under the standard Gaussian.
///
/// Nodes are the eigenvalues of the Jacobi matrix of the probabilists'
/// recurrence (off-diagonal `√j`), polished by Newton steps on `h_n`;
/// weights are the Christoffel numbers `1 / Σ_{j<n} h_j(x)²`, which sum to
/// one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one node"));
        }
        let off: Vec<f64> = (1..n).map(|j| math::sqrt(j as f64)).collect();
        let mut nodes = crate::linalg::tridiagonal_eigenvalues(&vec![0.0; n], &off)?;
        let mut h = vec![0.0; n + 1];
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                basis_all(*x, &mut h);
                // h_n' = √n h_{n−1}
                let step = h[n] / (math::sqrt(n as f64) * h[n - 1]);
                if !step.is_finite() {
                    break;
                }
                *x -= step;
            }
            basis_all(*x, &mut h);
            weights.push(1.0 / h[..n].iter().map(|v| v * v).sum::<f64>());
        }
        // symmetrise: the rule is exact for odd integrands
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        Ok(GaussHermite { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(x)]` for `x ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gaussian expectations of integrands that are smooth except at the origin.
///
/// Composite Gauss–Legendre on panels of `[−L, 0]` and `[0, L]`, weighted by
/// the standard normal density. Gauss–Hermite converges slowly on a kink
/// (about `4e−3` relative error at 200 nodes for `ReLU`); this rule keeps the
/// kink on a panel boundary.
#[derive(Debug, Clone)]
pub struct SplitGaussian {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SplitGaussian {
    const HALF_WIDTH: f64 = 10.0;
    const PANELS_PER_SIDE: usize = 20;
    const POINTS: usize = 12;

    pub fn new() -> Result<Self> {
        let (gl_x, gl_w) = gauss_legendre(Self::POINTS)?;
        let width = Self::HALF_WIDTH / Self::PANELS_PER_SIDE as f64;
        let norm = 1.0 / math::sqrt(2.0 * math::PI);
        let mut nodes = Vec::with_capacity(2 * Self::PANELS_PER_SIDE * Self::POINTS);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for p in 0..2 * Self::PANELS_PER_SIDE {
            let lo = -Self::HALF_WIDTH + p as f64 * width;
            for (&t, &w) in gl_x.iter().zip(&gl_w) {
                let x = lo + 0.5 * width * (t + 1.0);
                nodes.push(x);
                weights.push(0.5 * width * w * norm * math::exp(-0.5 * x * x));
            }
        }
        Ok(SplitGaussian { nodes, weights })
    }

    /// `E[f(x)]` for `x ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let off: Vec<f64> = (1..n).map(|j| j as f64 / math::sqrt((4 * j * j - 1) as f64)).collect();
    let mut nodes = crate::linalg::tridiagonal_eigenvalues(&vec![0.0; n], &off)?;
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let mut dp = 1.0;
        for _ in 0..3 {
            let (p, d) = legendre_with_deriv(n, *x);
            dp = d;
            *x -= p / d;
        }
        weights.push(2.0 / ((1.0 - *x * *x) * dp * dp));
    }
    Ok((nodes, weights))
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Truncated Hermite expansion `σ_0 … σ_N` of an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    coeffs: Vec<f64>,
    tail_mass: f64,
    second_moment: f64,
    /// Activation the coefficients came from, with its quadrature rule
    /// when the coefficients are not exact.
    source: Option<(ActivationSpec, Option<GaussHermite>)>,
}

impl HermiteExpansion {
    /// Wraps explicit coefficients; `second_moment` is `E[φ(x)²]`.
    pub fn from_coeffs(coeffs: Vec<f64>, second_moment: f64) -> Self {
        let captured: f64 = coeffs.iter().map(|s| s * s).sum();
        HermiteExpansion { tail_mass: (second_moment - captured).max(0.0), coeffs, second_moment, source: None }
    }

    fn with_source(mut self, activation: &ActivationSpec, quad: Option<GaussHermite>) -> Self {
        self.source = Some((*activation, quad));
        self
    }

    /// Coefficients of `x ↦ φ(αx)` up to the same degree.
    ///
    /// Expansions built by [`expand_activation`] re-expand the activation
    /// itself. Bare coefficient lists fall back to [`scaled_coefficients`],
    /// whose truncated series is only reliable for `α ≤ 1`: `h_n(αx)` has
    /// Gaussian norm growing like `(2α² − 1)^{n/2}`.
    pub fn at_scale(&self, alpha: f64) -> Vec<f64> {
        if alpha == 1.0 {
            return self.coeffs.clone();
        }
        let n = self.truncation_degree();
        match &self.source {
            Some((act, Some(quad))) => quadrature_coefficients(act, alpha, n, quad).0,
            Some((act, None)) => exact_scaled_coefficients(act, alpha, n).expect("exact family"),
            None => scaled_coefficients(self, alpha),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn truncation_degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Estimated `Σ_{i>N} σ_i²`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `E[φ(x)²]` under the standard Gaussian.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }
}

/// Expands an activation in the orthonormal Hermite basis up to degree `n`.
///
/// Smooth activations use `nodes`-point Gauss–Hermite quadrature. The
/// identity is exact (`σ₁ = 1`). ReLU and leaky ReLU have a kink at the
/// origin, where quadrature converges slowly, so their coefficients come
/// from the exact identity
/// `E[ReLU(x) He_n(x)] = He_{n−2}(0)/√(2π)` for `n ≥ 2`.
pub fn expand_activation(activation: &ActivationSpec, n: usize, nodes: usize) -> Result<HermiteExpansion> {
    if n < 1 {
        return Err(Error::InvalidArgument("expansion degree must be at least 1"));
    }
    if n > MAX_DEGREE {
        return Err(Error::DegreeTooLarge { requested: n, max: MAX_DEGREE });
    }
    if nodes < 2 * n {
        return Err(Error::InvalidArgument("quadrature needs at least 2N nodes"));
    }
    match activation.kind() {
        ActivationKind::Identity => {
            let mut coeffs = vec![0.0; n + 1];
            coeffs[1] = 1.0;
            Ok(HermiteExpansion::from_coeffs(coeffs, 1.0).with_source(activation, None))
        }
        ActivationKind::Relu => Ok(relu_family_expansion(n, 0.0).with_source(activation, None)),
        ActivationKind::LeakyRelu(a) => Ok(relu_family_expansion(n, a).with_source(activation, None)),
        _ => {
            let quad = GaussHermite::new(nodes)?;
            let (coeffs, second) = quadrature_coefficients(activation, 1.0, n, &quad);
            Ok(HermiteExpansion::from_coeffs(coeffs, second).with_source(activation, Some(quad)))
        }
    }
}

/// `E[φ(αx) h_i(x)]` for `i ≤ n` and `E[φ(αx)²]` by quadrature.
fn quadrature_coefficients(activation: &ActivationSpec, alpha: f64, n: usize, quad: &GaussHermite) -> (Vec<f64>, f64) {
    let mut coeffs = vec![0.0; n + 1];
    let mut h = vec![0.0; n + 1];
    let mut second = 0.0;
    for (&x, &w) in quad.nodes().iter().zip(quad.weights()) {
        let f = activation.value(alpha * x);
        basis_all(x, &mut h);
        for (c, hv) in coeffs.iter_mut().zip(&h) {
            *c += w * f * hv;
        }
        second += w * f * f;
    }
    (coeffs, second)
}

/// Coefficients of `x ↦ φ(αx)` for the piecewise-linear activations, which
/// are positively homogeneous: `φ(αx) = αφ(x)` for `α > 0`. `None` for
/// the other families.
fn exact_scaled_coefficients(activation: &ActivationSpec, alpha: f64, n: usize) -> Option<Vec<f64>> {
    let base = match activation.kind() {
        ActivationKind::Identity => {
            let mut c = vec![0.0; n + 1];
            c[1] = 1.0;
            c
        }
        ActivationKind::Relu => relu_family_expansion(n, 0.0).coeffs,
        ActivationKind::LeakyRelu(a) => relu_family_expansion(n, a).coeffs,
        _ => return None,
    };
    Some(base.into_iter().map(|s| alpha * s).collect())
}

/// Expansion of `max(x, αx) = (1−α)ReLU(x) + αx`; `α = 0` is plain ReLU.
fn relu_family_expansion(n: usize, alpha: f64) -> HermiteExpansion {
    let inv_sqrt_2pi = 1.0 / math::sqrt(2.0 * math::PI);
    let mut relu = vec![0.0; n + 1];
    relu[0] = inv_sqrt_2pi;
    relu[1] = 0.5;
    // h_j(0) for even j via h_{j+2}(0) = −√((j+1)/(j+2)) h_j(0).
    let mut h_at_zero = 1.0;
    for deg in (2..=n).step_by(2) {
        let j = deg - 2;
        if j > 0 {
            h_at_zero *= -math::sqrt((j - 1) as f64 / j as f64);
        }
        relu[deg] = inv_sqrt_2pi * h_at_zero / math::sqrt((deg * (deg - 1)) as f64);
    }
    let coeffs: Vec<f64> = relu
        .iter()
        .enumerate()
        .map(|(i, &s)| if i == 1 { (1.0 - alpha) * s + alpha } else { (1.0 - alpha) * s })
        .collect();
    HermiteExpansion::from_coeffs(coeffs, 0.5 * (1.0 + alpha * alpha))
}

/// Dual kernel `Σ σ_i² ρ^i`, i.e. `E[φ(uᵀz)φ(vᵀz)]` for unit `u, v` with `uᵀv = ρ`.
pub fn dual_kernel(exp: &HermiteExpansion, rho: f64) -> f64 {
    exp.coeffs.iter().rev().fold(0.0, |acc, s| acc * rho + s * s)
}

/// First derivative of [`dual_kernel`] in `ρ`.
pub fn dual_kernel_deriv(exp: &HermiteExpansion, rho: f64) -> f64 {
    poly_deriv(&squared(exp), rho)
}

fn squared(exp: &HermiteExpansion) -> Vec<f64> {
    exp.coeffs.iter().map(|s| s * s).collect()
}

/// Closed form of the plain ReLU dual kernel,
/// `E[ReLU(x) ReLU(y)] = (√(1−ρ²) + (π − arccos ρ) ρ) / (2π)`.
///
/// The same expression without the factor `1/2` is sometimes quoted; that
/// version equals one at `ρ = 1`, whereas `E[ReLU(x)²] = 1/2`.
pub fn relu_arccos_kernel(rho: f64) -> f64 {
    let r = rho.clamp(-1.0, 1.0);
    (math::sqrt(1.0 - r * r) + (math::PI - math::acos(r)) * r) / (2.0 * math::PI)
}

/// `η_α^{n,i} = α^{n−2i}(α²−1)^i C(n,2i)(2i)!/i! 2^{−i}`, the coefficient of
/// `He_{n−2i}(x)` in `He_n(αx)`.
pub fn mult_coeff(alpha: f64, n: usize, i: usize) -> Result<f64> {
    if 2 * i > n {
        return Err(Error::InvalidArgument("multiplication index exceeds floor(n/2)"));
    }
    // C(n,2i)(2i)!/i! = n! / ((n−2i)! i!)
    let mut c = 1.0;
    for j in (n - 2 * i + 1)..=n {
        c *= j as f64;
    }
    for j in 1..=i {
        c /= j as f64;
    }
    Ok(math::powi(alpha, (n - 2 * i) as i32) * math::powi(alpha * alpha - 1.0, i as i32) * c
        / math::powi(2.0, i as i32))
}

/// Coefficient of `h_{n−2i}(x)` in `h_n(αx)` for the orthonormal basis:
/// `η_α^{n,i} √((n−2i)!/n!)`.
pub fn normalized_mult_coeff(alpha: f64, n: usize, i: usize) -> Result<f64> {
    if 2 * i > n {
        return Err(Error::InvalidArgument("multiplication index exceeds floor(n/2)"));
    }
    // √(n!/(n−2i)!) / (i! 2^i), built incrementally to stay in range.
    let mut c = 1.0;
    for j in (n - 2 * i + 1)..=n {
        c *= math::sqrt(j as f64);
    }
    for j in 1..=i {
        c /= 2.0 * j as f64;
    }
    Ok(math::powi(alpha, (n - 2 * i) as i32) * math::powi(alpha * alpha - 1.0, i as i32) * c)
}

/// `E[h_m(x) h_n(y)]` for `(x, y)` jointly normal with standard deviations
/// `α`, `β` and correlation `ρ`.
///
/// Both factors are rewritten in the standardised variables and only
/// matching degrees `p ≡ m ≡ n (mod 2)`, `p ≤ min(m, n)` survive:
/// `Σ_p c_α^{m,(m−p)/2} c_β^{n,(n−p)/2} ρ^p` with `c` from
/// [`normalized_mult_coeff`]. Opposite parity gives zero.
pub fn scaled_pair_expectation(alpha: f64, beta: f64, rho: f64, m: usize, n: usize) -> f64 {
    if (m + n) % 2 == 1 {
        return 0.0;
    }
    let l = m.min(n);
    let mut total = 0.0;
    let mut p = l % 2;
    while p <= l {
        let ca = normalized_mult_coeff(alpha, m, (m - p) / 2).expect("index within range");
        let cb = normalized_mult_coeff(beta, n, (n - p) / 2).expect("index within range");
        total += ca * cb * math::powi(rho, p as i32);
        p += 2;
    }
    total
}

/// Coefficients `a_p` of `φ(αx) ≈ Σ_p a_p h_p(x)` obtained from the truncated
/// expansion of `φ` through the multiplication theorem. Accurate for
/// `α ≤ 1`; see [`HermiteExpansion::at_scale`].
pub fn scaled_coefficients(exp: &HermiteExpansion, alpha: f64) -> Vec<f64> {
    let n = exp.truncation_degree();
    let mut out = vec![0.0; n + 1];
    for (m, &sigma) in exp.coeffs.iter().enumerate() {
        if sigma == 0.0 {
            continue;
        }
        for i in 0..=m / 2 {
            out[m - 2 * i] += sigma * normalized_mult_coeff(alpha, m, i).expect("index within range");
        }
    }
    out
}

/// `E[φ(αx̂) φ(βŷ)]` for unit-variance `x̂, ŷ` with correlation `ρ`,
/// `Σ_p a_p(α) a_p(β) ρ^p` with `a(α)` from [`HermiteExpansion::at_scale`].
pub fn nonunit_kernel(exp: &HermiteExpansion, alpha: f64, beta: f64, rho: f64) -> f64 {
    ScaledKernel::new(exp, alpha, beta).value(rho)
}

/// The kernel `ρ ↦ E[φ(αx̂) φ(βŷ)]` as a polynomial in `ρ` for fixed scales.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    /// `coeffs[p]` multiplies `ρ^p`.
    coeffs: Vec<f64>,
}

impl ScaledKernel {
    pub fn new(exp: &HermiteExpansion, alpha: f64, beta: f64) -> Self {
        let a = exp.at_scale(alpha);
        let coeffs = if alpha == beta {
            a.iter().map(|v| v * v).collect()
        } else {
            let b = exp.at_scale(beta);
            a.iter().zip(&b).map(|(x, y)| x * y).collect()
        };
        ScaledKernel { coeffs }
    }

    /// Unit-scale kernel, identical to [`dual_kernel`].
    pub fn unit(exp: &HermiteExpansion) -> Self {
        ScaledKernel { coeffs: squared(exp) }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * rho + c)
    }

    pub fn deriv(&self, rho: f64) -> f64 {
        poly_deriv(&self.coeffs, rho)
    }

    pub fn deriv2(&self, rho: f64) -> f64 {
        let mut acc = 0.0;
        for (p, c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * rho + (p * (p - 1)) as f64 * c;
        }
        acc
    }
}

fn poly_deriv(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (p, c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * x + p as f64 * c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_rule_handles_kinks() {
        let q = SplitGaussian::new().unwrap();
        assert!((q.expect(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((q.expect(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((q.expect(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        let relu = q.expect(|x| x.max(0.0));
        assert!((relu - 1.0 / (2.0 * math::PI).sqrt()).abs() < 1e-14);
    }
    use crate::model::ActivationSpec;

    #[test]
    fn basis_small_degrees() {
        assert_eq!(basis_eval(0, 3.7), 1.0);
        assert_eq!(basis_eval(1, 2.0), 2.0);
        let h2 = basis_eval(2, 0.0);
        assert!((h2 + 1.0 / core::f64::consts::SQRT_2).abs() < 1e-15);
        for x in [-2.5, -0.3, 0.0, 1.1, 4.0] {
            let explicit = (x * x - 1.0) / core::f64::consts::SQRT_2;
            assert!((basis_eval(2, x) - explicit).abs() < 1e-13);
            let explicit3 = (x * x * x - 3.0 * x) / math::sqrt(6.0);
            assert!((basis_eval(3, x) - explicit3).abs() < 1e-12);
        }
        let mut all = [0.0; 8];
        basis_all(0.7, &mut all);
        for (n, v) in all.iter().enumerate() {
            assert!((v - basis_eval(n, 0.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_is_orthonormal() {
        let q = GaussHermite::new(DEFAULT_NODES).unwrap();
        assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut h = [0.0; 22];
        let mut gram = [[0.0; 22]; 22];
        for (&x, &w) in q.nodes().iter().zip(q.weights()) {
            basis_all(x, &mut h);
            for m in 0..22 {
                for n in 0..22 {
                    gram[m][n] += w * h[m] * h[n];
                }
            }
        }
        for m in 0..22 {
            for n in 0..22 {
                let target = if m == n { 1.0 } else { 0.0 };
                assert!((gram[m][n] - target).abs() < 1e-8, "({m},{n}) = {}", gram[m][n]);
            }
        }
        // even moments of the Gaussian
        assert!((q.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((q.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
    }

    #[test]
    fn expansion_rejects_bad_degrees() {
        let tanh = ActivationSpec::tanh();
        assert!(matches!(expand_activation(&tanh, 0, 200), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            expand_activation(&tanh, MAX_DEGREE + 1, 1000),
            Err(Error::DegreeTooLarge { .. })
        ));
        assert!(expand_activation(&tanh, 21, 30).is_err());
    }

    #[test]
    fn identity_expansion_is_h1() {
        let e = expand_activation(&ActivationSpec::identity(), 5, 200).unwrap();
        for (i, s) in e.coeffs().iter().enumerate() {
            let target = if i == 1 { 1.0 } else { 0.0 };
            assert!((s - target).abs() < 1e-12);
        }
        assert!(e.tail_mass() < 1e-12);
    }

    #[test]
    fn odd_activations_have_no_even_coefficients() {
        let e = expand_activation(&ActivationSpec::tanh(), 10, 200).unwrap();
        for i in (0..=10).step_by(2) {
            assert!(e.sigma(i).abs() < 1e-10, "σ_{i} = {}", e.sigma(i));
        }
        let s = expand_activation(&ActivationSpec::sigmoid(), 10, 200).unwrap();
        assert!((s.sigma(0) - 0.5).abs() < 1e-12);
        for i in (2..=10).step_by(2) {
            assert!(s.sigma(i).abs() < 1e-10);
        }
    }

    #[test]
    fn leaky_relu_first_coefficient() {
        let e = expand_activation(&ActivationSpec::leaky_relu(0.2).unwrap(), 10, 200).unwrap();
        assert!((e.sigma(1) - 0.6).abs() < 1e-12);
        assert!((e.second_moment() - 0.52).abs() < 1e-15);
    }

    #[test]
    fn relu_family_matches_quadrature_of_smooth_part() {
        // |x| is even, so odd coefficients of ReLU beyond σ₁ vanish; check the
        // even ones against a fine trapezoid rule on the half line.
        let e = expand_activation(&ActivationSpec::relu(), 12, 200).unwrap();
        let steps = 400_000;
        let hstep = 12.0 / steps as f64;
        for n in [0usize, 2, 4, 6, 12] {
            let mut acc = 0.0;
            for s in 0..=steps {
                let x = s as f64 * hstep;
                let wt = if s == 0 || s == steps { 0.5 } else { 1.0 };
                acc += wt * x * basis_eval(n, x) * math::exp(-0.5 * x * x);
            }
            acc *= hstep / math::sqrt(2.0 * math::PI);
            assert!((acc - e.sigma(n)).abs() < 1e-9, "n={n}: {acc} vs {}", e.sigma(n));
        }
        assert!(e.sigma(3).abs() < 1e-15);
    }

    #[test]
    fn parseval_consistency() {
        for act in [
            ActivationSpec::tanh(),
            ActivationSpec::sigmoid(),
            ActivationSpec::leaky_relu(0.2).unwrap(),
            ActivationSpec::identity(),
        ] {
            let e = expand_activation(&act, DEFAULT_DEGREE, DEFAULT_NODES).unwrap();
            let captured: f64 = e.coeffs().iter().map(|s| s * s).sum();
            assert!(e.tail_mass() >= 0.0);
            assert!(captured <= e.second_moment() + 1e-12);
            assert!((captured + e.tail_mass() - e.second_moment()).abs() <= 1e-6);
        }
    }

    #[test]
    fn dual_kernel_endpoints() {
        let e = expand_activation(&ActivationSpec::sigmoid(), 21, 200).unwrap();
        assert!((dual_kernel(&e, 0.0) - e.sigma(0).powi(2)).abs() < 1e-15);
        let total: f64 = e.coeffs().iter().map(|s| s * s).sum();
        assert!((dual_kernel(&e, 1.0) - total).abs() < 1e-14);
        assert!((dual_kernel(&e, 1.0) - e.second_moment()).abs() < 1e-6);
        let alt: f64 = e
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, s)| if i % 2 == 1 { -s * s } else { s * s })
            .sum();
        assert!((dual_kernel(&e, -1.0) - alt).abs() < 1e-14);
    }

    #[test]
    fn dual_kernel_derivative_matches_difference_quotient() {
        let e = expand_activation(&ActivationSpec::tanh(), 21, 200).unwrap();
        let h = 1e-6;
        for rho in [-0.9, -0.2, 0.3, 0.95] {
            let fd = (dual_kernel(&e, rho + h) - dual_kernel(&e, rho - h)) / (2.0 * h);
            assert!((fd - dual_kernel_deriv(&e, rho)).abs() < 1e-8);
        }
    }

    #[test]
    fn relu_expansion_matches_arccos_kernel() {
        let e = expand_activation(&ActivationSpec::relu(), 120, 240).unwrap();
        for i in 0..=16 {
            let rho = -0.8 + 0.1 * i as f64;
            assert!((dual_kernel(&e, rho) - relu_arccos_kernel(rho)).abs() < 1e-10, "ρ={rho}");
        }
        assert!((relu_arccos_kernel(1.0) - 0.5).abs() < 1e-15);
        assert!((relu_arccos_kernel(0.0) - 1.0 / (2.0 * math::PI)).abs() < 1e-15);
    }

    #[test]
    fn multiplication_coefficients() {
        for n in 2..8 {
            for i in 1..=n / 2 {
                assert_eq!(mult_coeff(1.0, n, i).unwrap(), 0.0);
            }
        }
        assert_eq!(mult_coeff(2.0, 1, 0).unwrap(), 2.0);
        assert_eq!(mult_coeff(2.0, 2, 1).unwrap(), 3.0);
        assert!(mult_coeff(2.0, 3, 2).is_err());
        // E[h_2(2x) h_0(x)] = E[(4x² − 1)/√2] = 3/√2 = η √(0!/2!)
        let q = GaussHermite::new(40).unwrap();
        let quad = q.expect(|x| basis_eval(2, 2.0 * x));
        let bridged = mult_coeff(2.0, 2, 1).unwrap() / math::sqrt(2.0);
        assert!((quad - bridged).abs() < 1e-12);
        assert!((normalized_mult_coeff(2.0, 2, 1).unwrap() - bridged).abs() < 1e-15);
    }

    #[test]
    fn normalized_coefficients_reproduce_scaled_basis() {
        let q = GaussHermite::new(80).unwrap();
        for &alpha in &[0.6, 1.0, 1.4] {
            for n in 0..12 {
                for i in 0..=n / 2 {
                    let quad = q.expect(|x| basis_eval(n, alpha * x) * basis_eval(n - 2 * i, x));
                    let c = normalized_mult_coeff(alpha, n, i).unwrap();
                    assert!((quad - c).abs() < 1e-9, "α={alpha} n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn pair_expectation_trivial_cases() {
        assert_eq!(scaled_pair_expectation(1.3, 0.4, 0.2, 1, 2), 0.0);
        for rho in [-0.7, 0.0, 0.45] {
            assert!((scaled_pair_expectation(1.0, 1.0, rho, 1, 1) - rho).abs() < 1e-15);
            assert!((scaled_pair_expectation(1.0, 1.0, rho, 4, 4) - rho.powi(4)).abs() < 1e-14);
            assert!(scaled_pair_expectation(1.0, 1.0, rho, 2, 4).abs() < 1e-15);
        }
        // E[h_1(αx̂) h_1(βŷ)] = αβρ
        assert!((scaled_pair_expectation(1.5, 0.8, 0.3, 1, 1) - 0.36).abs() < 1e-15);
    }

    #[test]
    fn nonunit_kernel_reductions() {
        let e = expand_activation(&ActivationSpec::tanh(), 21, 200).unwrap();
        for j in 0..21 {
            let rho = -1.0 + 0.1 * j as f64;
            assert!((nonunit_kernel(&e, 1.0, 1.0, rho) - dual_kernel(&e, rho)).abs() < 1e-10);
        }
        let id = expand_activation(&ActivationSpec::identity(), 5, 200).unwrap();
        let v = nonunit_kernel(&id, 1.7, 0.4, -0.3);
        assert!((v - 1.7 * 0.4 * -0.3).abs() < 1e-12);
    }

    #[test]
    fn nonunit_kernel_equals_literal_double_sum() {
        let e = expand_activation(&ActivationSpec::sigmoid(), 15, 200).unwrap();
        let (a, b, rho) = (1.2, 0.75, 0.35);
        let mut double = 0.0;
        for m in 0..=15 {
            for n in 0..=15 {
                double += e.sigma(m) * e.sigma(n) * scaled_pair_expectation(a, b, rho, m, n);
            }
        }
        let bare = HermiteExpansion::from_coeffs(e.coeffs().to_vec(), e.second_moment());
        assert!((double - nonunit_kernel(&bare, a, b, rho)).abs() < 1e-12);
    }

    #[test]
    fn direct_and_series_rescaling_agree_below_unit_scale() {
        // The series drops the part of each coefficient carried by degrees
        // above N; leaky ReLU coefficients decay only polynomially.
        let cases = [(ActivationSpec::tanh(), 1e-3), (ActivationSpec::sigmoid(), 1e-3), (ActivationSpec::leaky_relu(0.2).unwrap(), 1e-2)];
        for (act, tol) in cases {
            let e = expand_activation(&act, 21, 200).unwrap();
            let bare = HermiteExpansion::from_coeffs(e.coeffs().to_vec(), e.second_moment());
            for alpha in [0.5, 0.8, 0.95] {
                let direct = e.at_scale(alpha);
                let series = bare.at_scale(alpha);
                for (p, (x, y)) in direct.iter().zip(&series).enumerate().take(8) {
                    assert!((x - y).abs() < tol, "{} α={alpha} p={p}: {x} vs {y}", act.name());
                }
            }
        }
    }

    #[test]
    fn homogeneous_rescaling_is_exact() {
        let e = expand_activation(&ActivationSpec::leaky_relu(0.3).unwrap(), 21, 200).unwrap();
        let q = GaussHermite::new(DEFAULT_NODES).unwrap();
        let scaled = e.at_scale(1.7);
        assert!((scaled[1] - 1.7 * e.sigma(1)).abs() < 1e-15);
        let second: f64 = q.expect(|x| ActivationSpec::leaky_relu(0.3).unwrap().value(1.7 * x) * x);
        assert!((scaled[1] - second).abs() < 1e-12);
    }

    #[test]
    fn scaled_kernel_derivatives() {
        let e = expand_activation(&ActivationSpec::tanh(), 21, 200).unwrap();
        let k = ScaledKernel::new(&e, 1.2, 0.9);
        let h = 1e-5;
        for rho in [-0.8, 0.1, 0.7] {
            let d1 = (k.value(rho + h) - k.value(rho - h)) / (2.0 * h);
            let d2 = (k.deriv(rho + h) - k.deriv(rho - h)) / (2.0 * h);
            assert!((d1 - k.deriv(rho)).abs() < 1e-8);
            assert!((d2 - k.deriv2(rho)).abs() < 1e-7);
        }
    }
}
