//! Activations, the one-layer generator, discriminator families and Gaussian
//! sampling.
//!
//! Batches of samples are stored column-major in the statistical sense: a
//! `d × m` [`Mat`] holds `m` samples of dimension `d`, one per column.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Mat};
use crate::math;

/// The built-in activation families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Identity,
    Tanh,
    Sigmoid,
    Relu,
    /// `max(x, αx)` with leakage `α ∈ (0, 1)`.
    LeakyRelu(f64),
}

/// An activation with its derivatives and analytic properties.
///
/// The second derivative of the piecewise-linear activations is taken to be
/// zero everywhere, including at the kink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationSpec {
    kind: ActivationKind,
}

impl ActivationSpec {
    pub fn new(kind: ActivationKind) -> Result<Self> {
        if let ActivationKind::LeakyRelu(a) = kind {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument("leaky relu leakage must lie in (0, 1)"));
            }
        }
        Ok(ActivationSpec { kind })
    }

    pub fn identity() -> Self {
        ActivationSpec { kind: ActivationKind::Identity }
    }

    pub fn tanh() -> Self {
        ActivationSpec { kind: ActivationKind::Tanh }
    }

    pub fn sigmoid() -> Self {
        ActivationSpec { kind: ActivationKind::Sigmoid }
    }

    pub fn relu() -> Self {
        ActivationSpec { kind: ActivationKind::Relu }
    }

    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        Self::new(ActivationKind::LeakyRelu(alpha))
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ActivationKind::Identity => "identity",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu(_) => "leaky_relu",
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Identity => x,
            ActivationKind::Tanh => math::tanh(x),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
        }
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.eval2(x).1
    }

    #[inline]
    pub fn deriv2(&self, x: f64) -> f64 {
        self.eval3(x).2
    }

    /// `(φ(x), φ'(x))` sharing the transcendental evaluation.
    #[inline]
    pub fn eval2(&self, x: f64) -> (f64, f64) {
        match self.kind {
            ActivationKind::Identity => (x, 1.0),
            ActivationKind::Tanh => {
                let t = math::tanh(x);
                (t, 1.0 - t * t)
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                (s, s * (1.0 - s))
            }
            ActivationKind::Relu => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            ActivationKind::LeakyRelu(a) => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    (a * x, a)
                }
            }
        }
    }

    /// `(φ(x), φ'(x), φ''(x))`.
    #[inline]
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        match self.kind {
            ActivationKind::Tanh => {
                let t = math::tanh(x);
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                let d = s * (1.0 - s);
                (s, d, d * (1.0 - 2.0 * s))
            }
            _ => {
                let (v, d) = self.eval2(x);
                (v, d, 0.0)
            }
        }
    }

    /// `C = ½(φ(x) + φ(−x))` when that is constant in `x`.
    pub fn bias_constant(&self) -> Option<f64> {
        match self.kind {
            ActivationKind::Identity | ActivationKind::Tanh => Some(0.0),
            ActivationKind::Sigmoid => Some(0.5),
            ActivationKind::Relu | ActivationKind::LeakyRelu(_) => None,
        }
    }

    /// Odd function plus a constant, monotone increasing.
    pub fn odd_plus_constant(&self) -> bool {
        self.bias_constant().is_some()
    }

    /// Even component `½(φ(x)+φ(−x))` positive and increasing on `[0, ∞)`.
    pub fn even_part_increasing(&self) -> bool {
        matches!(self.kind, ActivationKind::Relu | ActivationKind::LeakyRelu(_))
    }

    /// Hermite coefficients vanish at even degrees `≥ 2` and `σ₁ ≠ 0`.
    pub fn hermite_odd(&self) -> bool {
        self.odd_plus_constant()
    }

    /// 1-Lipschitz with a 1-Lipschitz derivative.
    pub fn lipschitz_smooth(&self) -> bool {
        matches!(
            self.kind,
            ActivationKind::Identity | ActivationKind::Tanh | ActivationKind::Sigmoid
        )
    }

    /// Feature map seen by the first-moment discriminator.
    ///
    /// For odd-plus-constant activations this is the rectified shift
    /// `x ↦ R(x − C)`; otherwise the plain linear discriminator is used and
    /// the map is the identity.
    #[inline]
    pub fn marginal_feature(&self, x: f64) -> f64 {
        match self.bias_constant() {
            Some(c) => (x - c).max(0.0),
            None => x,
        }
    }

    /// `ψ(y) = feature(φ(y))` and `ψ'(y)` for a pre-activation `y`.
    #[inline]
    pub fn marginal_feature_of_preactivation(&self, y: f64) -> (f64, f64) {
        let (v, d) = self.eval2(y);
        match self.bias_constant() {
            Some(c) => {
                if v > c {
                    (v - c, d)
                } else {
                    (0.0, 0.0)
                }
            }
            None => (v, d),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

/// Generator parameters `A` (d × k) with optional per-row norm targets.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub a: Mat,
    pub row_norm_targets: Option<Vec<f64>>,
}

impl GeneratorParams {
    pub fn new(a: Mat) -> Self {
        GeneratorParams { a, row_norm_targets: None }
    }

    pub fn with_targets(a: Mat, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                op: "GeneratorParams::with_targets",
                expected: (a.rows(), 1),
                found: (targets.len(), 1),
            });
        }
        Ok(GeneratorParams { a, row_norm_targets: Some(targets) })
    }

    /// Largest `|‖a_i‖ − target_i|`, zero when no targets are set.
    pub fn feasibility_gap(&self) -> f64 {
        match &self.row_norm_targets {
            None => 0.0,
            Some(t) => {
                self.a.row_norms().iter().zip(t).fold(0.0, |m, (n, t)| m.max((n - t).abs()))
            }
        }
    }
}

/// Ground-truth generator `A*` and its covariance `Z* = A*A*ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub a_star: Mat,
    pub z_star: Mat,
    pub row_norms: Vec<f64>,
}

impl GroundTruth {
    pub fn new(a_star: Mat) -> Self {
        let z_star = a_star.gram();
        let row_norms = a_star.row_norms();
        GroundTruth { a_star, z_star, row_norms }
    }

    /// `d × k0` matrix with rows uniform on the unit sphere.
    pub fn random_unit_rows<R: Rng + ?Sized>(d: usize, k0: usize, rng: &mut R) -> Self {
        let mut a = Mat::zeros(d, k0);
        for i in 0..d {
            let row = uniform_on_sphere(k0, rng);
            a.row_mut(i).copy_from_slice(&row);
        }
        GroundTruth::new(a)
    }

    pub fn dim(&self) -> usize {
        self.a_star.rows()
    }

    /// Diagonal constraint targets `y_i = (Z*)_ii`.
    pub fn diag_targets(&self) -> Vec<f64> {
        self.z_star.diag()
    }

    /// Draws `n` observations `φ(A* z)`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, activation: &ActivationSpec, rng: &mut R) -> Mat {
        let z = sample_latent(self.a_star.cols(), n, rng);
        generate(&self.a_star, &z, activation).expect("latent dimension matches by construction")
    }
}

/// `k × m` matrix of i.i.d. standard normal draws.
pub fn sample_latent<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Mat {
    let mut z = Mat::zeros(k, m);
    for v in z.as_mut_slice() {
        *v = StandardNormal.sample(rng);
    }
    z
}

/// Uniform direction on the unit sphere in `R^dim`.
pub fn uniform_on_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Generator output `φ(Az)` for a batch `z` (k × m), returned as d × m.
pub fn generate(a: &Mat, z: &Mat, activation: &ActivationSpec) -> Result<Mat> {
    if z.rows() != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "generate",
            expected: (a.cols(), z.cols()),
            found: z.shape(),
        });
    }
    let mut out = a.matmul(z)?;
    for v in out.as_mut_slice() {
        *v = activation.value(*v);
    }
    Ok(out)
}

/// Rectified-adjusted linear discriminator `vᵀR(x − C·𝟙)`.
pub fn rectified_adjusted_disc(v: &[f64], x: &[f64], c: f64) -> f64 {
    v.iter().zip(x).map(|(vi, xi)| vi * (xi - c).max(0.0)).sum()
}

/// Quadratic discriminator `xᵀVx`.
pub fn quad_disc(v: &Mat, x: &[f64]) -> Result<f64> {
    let vx = v.matvec(x)?;
    Ok(dot(x, &vx))
}
