//! Graph statistics, MMD evaluation and sampling diagnostics.

mod diagnostics;
mod mmd;
mod orbits;

pub use diagnostics::{
    perturbation_experiment, perturbation_sweep, score_norm_trace, ScoreTrace, ScoreTraces,
};
pub use mmd::{gaussian_tv_kernel, mmd, normalize, total_variation, DEFAULT_SIGMA};
pub use orbits::{orbit_counts, orbit_totals, MAX_ORBIT_NODES, NUM_ORBITS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{Dataset, Graph};

pub const CLUSTERING_BINS: usize = 100;

/// Normalized histogram of real-node degrees; degrees above `max_deg` land in the last bin.
pub fn degree_hist(g: &Graph, max_deg: Option<usize>) -> Vec<f64> {
    let all = g.degrees();
    let degs: Vec<usize> = g.real_nodes().into_iter().map(|i| all[i]).collect();
    let top = max_deg.unwrap_or_else(|| degs.iter().copied().max().unwrap_or(0));
    let mut h = vec![0.0; top + 1];
    for d in &degs {
        h[(*d).min(top)] += 1.0;
    }
    normalize(&h)
}

/// Local clustering coefficient of every real node (0 when degree < 2).
pub fn clustering_coefficients(g: &Graph) -> Vec<f64> {
    let nodes = g.real_nodes();
    let a = g.a();
    nodes
        .iter()
        .map(|&i| {
            let nbrs: Vec<usize> = nodes
                .iter()
                .copied()
                .filter(|&j| a[[i, j]] != 0.0)
                .collect();
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut tri = 0usize;
            for (p, &u) in nbrs.iter().enumerate() {
                for &w in &nbrs[p + 1..] {
                    if a[[u, w]] != 0.0 {
                        tri += 1;
                    }
                }
            }
            2.0 * tri as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Normalized histogram of clustering coefficients over `bins` equal bins on `[0, 1]`.
pub fn clustering_hist(g: &Graph, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins.max(1)];
    for c in clustering_coefficients(g) {
        let b = ((c * bins as f64) as usize).min(h.len() - 1);
        h[b] += 1.0;
    }
    normalize(&h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub degree: f64,
    pub clustering: f64,
    pub orbit: f64,
    pub average: f64,
}

impl MmdReport {
    pub fn new(degree: f64, clustering: f64, orbit: f64) -> Self {
        MmdReport {
            degree,
            clustering,
            orbit,
            average: (degree + clustering + orbit) / 3.0,
        }
    }
}

struct Stats {
    degree: Vec<Vec<f64>>,
    clustering: Vec<Vec<f64>>,
    orbit: Vec<Vec<f64>>,
}

fn stats(graphs: &[Graph]) -> Result<Stats> {
    let per: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = graphs
        .par_iter()
        .map(|g| {
            Ok((
                degree_hist(g, None),
                clustering_hist(g, CLUSTERING_BINS),
                orbit_totals(g)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut s = Stats {
        degree: Vec::with_capacity(per.len()),
        clustering: Vec::with_capacity(per.len()),
        orbit: Vec::with_capacity(per.len()),
    };
    for (d, c, o) in per {
        s.degree.push(d);
        s.clustering.push(c);
        s.orbit.push(o);
    }
    Ok(s)
}

/// Degree, clustering and orbit MMDs with the default bandwidth.
pub fn evaluate(gen: &Dataset, reference: &Dataset) -> Result<MmdReport> {
    evaluate_with(gen, reference, DEFAULT_SIGMA)
}

/// Both sets are truncated to the size of the smaller one before comparison.
pub fn evaluate_with(gen: &Dataset, reference: &Dataset, sigma: f64) -> Result<MmdReport> {
    if gen.is_empty() || reference.is_empty() {
        return Err(Error::InvalidArgument(
            "evaluation needs two nonempty datasets".into(),
        ));
    }
    let n = gen.len().min(reference.len());
    let g = stats(&gen.graphs[..n])?;
    let r = stats(&reference.graphs[..n])?;
    Ok(MmdReport::new(
        mmd(&g.degree, &r.degree, sigma)?,
        mmd(&g.clustering, &r.clustering, sigma)?,
        mmd(&g.orbit, &r.orbit, sigma)?,
    ))
}
