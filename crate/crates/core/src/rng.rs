//! Seed derivation and Gaussian fills.
//!
//! Every stochastic component takes a `u64` seed and derives independent
//! sub-streams with [`derive_seed`], so parallel work (per graph, per chain,
//! per iteration) stays reproducible regardless of scheduling order.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `stream` from `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix(mix(base) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(base: u64, stream: u64) -> SeededRng {
    rng_from_seed(derive_seed(base, stream))
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard normal matrix, drawn in row-major order.
pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || normal(rng))
}

/// Symmetric standard normal matrix with zero diagonal: the strict upper
/// triangle is drawn row-major and mirrored.
pub fn symmetric_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Array2<f64> {
    let mut z = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = normal(rng);
            z[[i, j]] = v;
            z[[j, i]] = v;
        }
    }
    z
}
