//! Numerical core for learning one-layer generators `x = φ(Az)` with
//! stochastic gradient descent-ascent against linear, rectified-linear and
//! quadratic discriminators.
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function
//! of its inputs plus an explicitly passed random number generator, so runs
//! are reproducible bit-for-bit from a seed.
//!
//! Modules:
//! - [`hermite`]: orthonormal Hermite basis, activation expansions and the
//!   closed-form Gaussian kernels built from them.
//! - [`model`]: activations, generator parameters, discriminators, sampling.
//! - [`losses`]: first-moment and second-moment objectives with analytic
//!   gradients and Hessian-vector products.
//! - [`optimizer`]: marginal-norm recovery and projected stochastic GDA.
//! - [`stationarity`]: approximate KKT certificates and the recovery bound.
//! - [`hardness`]: the 3SAT to ReLU-bilinear min-max reduction.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod hardness;
pub mod hermite;
pub mod linalg;
pub mod losses;
pub(crate) mod math;
pub mod model;
pub mod optimizer;
pub mod stationarity;

pub use error::{Error, Result};
pub use linalg::Mat;

/// Seeded generator used throughout the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SeededRng`] from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

/// Derives an independent child seed from a parent seed and a stream index
/// (splitmix64 finalizer). Used to give every trial its own generator.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut z = parent ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
