//! Synthetic dataset generators.
//!
//! Graph `k` of a dataset draws from its own stream `rng::stream(seed, k)`, so
//! datasets are reproducible and generation order does not matter.

use rand::seq::index;
use rand::Rng;

use super::{Dataset, Graph};
use crate::error::{Error, Result};
use crate::rng;

/// Two-community random graphs.
///
/// Each graph draws `V ~ U{v_min..=v_max}` and splits the nodes into
/// communities of sizes `⌈V/2⌉` and `⌊V/2⌋`. Intra-community pairs are
/// Bernoulli(`p_intra`); `⌊inter_rate · V⌋` distinct inter-community pairs are
/// then drawn uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityParams {
    pub count: usize,
    pub v_min: usize,
    pub v_max: usize,
    pub p_intra: f64,
    pub inter_rate: f64,
    pub feature_dim: usize,
}

impl Default for CommunityParams {
    fn default() -> Self {
        CommunityParams {
            count: 100,
            v_min: 12,
            v_max: 20,
            p_intra: 0.7,
            inter_rate: 0.05,
            feature_dim: 8,
        }
    }
}

pub fn gen_community_small(params: &CommunityParams, seed: u64) -> Result<Dataset> {
    let CommunityParams {
        count,
        v_min,
        v_max,
        p_intra,
        inter_rate,
        feature_dim,
    } = *params;
    if count == 0 {
        return Err(Error::InvalidArgument(
            "community dataset needs count > 0".into(),
        ));
    }
    if !(2 <= v_min && v_min <= v_max) {
        return Err(Error::InvalidArgument(format!(
            "community sizes need 2 <= v_min <= v_max, got [{v_min}, {v_max}]"
        )));
    }
    if !(p_intra > 0.0 && p_intra <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "p_intra must lie in (0, 1], got {p_intra}"
        )));
    }
    if !(inter_rate >= 0.0 && inter_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inter_rate must be >= 0, got {inter_rate}"
        )));
    }
    let graphs = (0..count)
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let v = r.random_range(v_min..=v_max);
            let c1 = v.div_ceil(2);
            let c2 = v - c1;
            let mut edges = Vec::new();
            for (lo, hi) in [(0, c1), (c1, v)] {
                for i in lo..hi {
                    for j in (i + 1)..hi {
                        if r.random::<f64>() < p_intra {
                            edges.push((i, j));
                        }
                    }
                }
            }
            let n_inter = ((inter_rate * v as f64).floor() as usize).min(c1 * c2);
            if n_inter > 0 {
                for p in index::sample(&mut r, c1 * c2, n_inter).into_iter() {
                    edges.push((p / c2, c1 + p % c2));
                }
            }
            Graph::from_edges(v_max, feature_dim, v, &edges)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        graphs,
        v_max,
        feature_dim,
        format!(
            "community_small(count={count}, v=[{v_min},{v_max}], p_intra={p_intra}, inter_rate={inter_rate}, seed={seed})"
        ),
    )
}

/// 2D lattices with rows and columns drawn uniformly from inclusive ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    pub count: usize,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    pub feature_dim: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            count: 100,
            rows: (10, 20),
            cols: (10, 20),
            feature_dim: 5,
        }
    }
}

pub fn gen_grid(params: &GridParams, seed: u64) -> Result<Dataset> {
    let GridParams {
        count,
        rows,
        cols,
        feature_dim,
    } = *params;
    if count == 0 {
        return Err(Error::InvalidArgument(
            "grid dataset needs count > 0".into(),
        ));
    }
    if rows.0 < 2 || cols.0 < 2 || rows.0 > rows.1 || cols.0 > cols.1 {
        return Err(Error::InvalidArgument(format!(
            "grid ranges need 2 <= lo <= hi, got rows {rows:?}, cols {cols:?}"
        )));
    }
    let v_max = rows.1 * cols.1;
    let graphs = (0..count)
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let nr = r.random_range(rows.0..=rows.1);
            let nc = r.random_range(cols.0..=cols.1);
            let id = |i: usize, j: usize| i * nc + j;
            let mut edges = Vec::with_capacity(2 * nr * nc);
            for i in 0..nr {
                for j in 0..nc {
                    if j + 1 < nc {
                        edges.push((id(i, j), id(i, j + 1)));
                    }
                    if i + 1 < nr {
                        edges.push((id(i, j), id(i + 1, j)));
                    }
                }
            }
            Graph::from_edges(v_max, feature_dim, nr * nc, &edges)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        graphs,
        v_max,
        feature_dim,
        format!("grid(count={count}, rows={rows:?}, cols={cols:?}, seed={seed})"),
    )
}
