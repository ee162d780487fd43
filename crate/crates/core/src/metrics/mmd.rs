use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 1.0;

/// Histogram rescaled to unit mass; all-zero histograms stay zero.
pub fn normalize(h: &[f64]) -> Vec<f64> {
    let s: f64 = h.iter().sum();
    if s > 0.0 {
        h.iter().map(|v| v / s).collect()
    } else {
        h.to_vec()
    }
}

/// Total variation distance between two normalized histograms, zero-padding the shorter.
pub fn total_variation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().max(y.len());
    let at = |h: &[f64], k: usize| h.get(k).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|k| (at(x, k) - at(y, k)).abs()).sum::<f64>()
}

/// `exp(−d² / (2σ²))` with `d` the total variation distance.
pub fn gaussian_tv_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d = total_variation(x, y);
    (-d * d / (2.0 * sigma * sigma)).exp()
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> f64 {
    let rows: Vec<f64> = a
        .par_iter()
        .map(|x| {
            b.iter()
                .map(|y| gaussian_tv_kernel(x, y, sigma))
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum::<f64>() / (a.len() * b.len()) as f64
}

/// Biased squared MMD between two sets of histograms (each normalized first).
pub fn mmd(set_a: &[Vec<f64>], set_b: &[Vec<f64>], sigma: f64) -> Result<f64> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::InvalidArgument("MMD needs two nonempty sets".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel bandwidth must be > 0, got {sigma}"
        )));
    }
    let a: Vec<Vec<f64>> = set_a.iter().map(|h| normalize(h)).collect();
    let b: Vec<Vec<f64>> = set_b.iter().map(|h| normalize(h)).collect();
    Ok(mean_kernel(&a, &a, sigma) + mean_kernel(&b, &b, sigma) - 2.0 * mean_kernel(&a, &b, sigma))
}
