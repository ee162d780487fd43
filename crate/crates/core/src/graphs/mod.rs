//! Padded graph representation and datasets.
//!
//! A [`Graph`] stores node features `X` (`v_max × F`), a weighted symmetric
//! adjacency `A` (`v_max × v_max`) and a node mask. Masked rows of `X` and
//! masked rows/columns of `A` are zero, and `A` has a zero diagonal.

mod generate;
mod io;

pub use generate::{gen_community_small, gen_grid, CommunityParams, GridParams};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Pair mask `m mᵀ` with a zeroed diagonal.
pub fn pair_mask(mask: &[bool]) -> Array2<f64> {
    let n = mask.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i != j && mask[i] && mask[j] {
            1.0
        } else {
            0.0
        }
    })
}

pub fn node_mask(mask: &[bool]) -> Array1<f64> {
    mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    x: Array2<f64>,
    a: Array2<f64>,
    mask: Vec<bool>,
}

impl Graph {
    pub fn new(x: Array2<f64>, a: Array2<f64>, mask: Vec<bool>) -> Result<Self> {
        let g = Graph { x, a, mask };
        g.validate()?;
        Ok(g)
    }

    /// Binary graph whose first `v` nodes are real, with one-hot degree features.
    pub fn from_edges(
        v_max: usize,
        feature_dim: usize,
        v: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        if v > v_max {
            return Err(Error::InvalidGraph(format!(
                "v = {v} exceeds v_max = {v_max}"
            )));
        }
        let mut a = Array2::zeros((v_max, v_max));
        for &(i, j) in edges {
            if i == j || i >= v || j >= v {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) invalid for {v} nodes"
                )));
            }
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        let mask: Vec<bool> = (0..v_max).map(|i| i < v).collect();
        let x = degree_features(&a, &mask, feature_dim);
        Graph::new(x, a, mask)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mask.len();
        if self.a.dim() != (n, n) {
            return Err(Error::InvalidGraph(format!(
                "adjacency is {:?}, mask has {n} entries",
                self.a.dim()
            )));
        }
        if self.x.nrows() != n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows, mask has {n} entries",
                self.x.nrows()
            )));
        }
        for i in 0..n {
            if self.a[[i, i]] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..n {
                let (u, w) = (self.a[[i, j]], self.a[[j, i]]);
                if u != w {
                    return Err(Error::InvalidGraph(format!("asymmetric entry ({i}, {j})")));
                }
                if !u.is_finite() {
                    return Err(Error::InvalidGraph(format!("non-finite entry ({i}, {j})")));
                }
                if u != 0.0 && !(self.mask[i] && self.mask[j]) {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({i}, {j}) touches a masked node"
                    )));
                }
            }
            if !self.mask[i] && self.x.row(i).iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidGraph(format!("masked node {i} has features")));
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGraph("non-finite node feature".into()));
        }
        Ok(())
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn v_max(&self) -> usize {
        self.mask.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_nodes(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Number of nonzero entries above the diagonal.
    pub fn edge_count(&self) -> usize {
        let n = self.v_max();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.a[[i, j]] != 0.0).count())
            .sum()
    }

    /// Degrees of all `v_max` slots, counting nonzero entries.
    pub fn degrees(&self) -> Vec<usize> {
        self.a
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .collect()
    }

    /// Indices of real nodes in slot order.
    pub fn real_nodes(&self) -> Vec<usize> {
        (0..self.v_max()).filter(|&i| self.mask[i]).collect()
    }

    /// Relabels nodes: slot `i` of the result holds old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.v_max();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidArgument(
                "not a permutation of the node slots".into(),
            ));
        }
        let a = Array2::from_shape_fn((n, n), |(i, j)| self.a[[perm[i], perm[j]]]);
        let x = Array2::from_shape_fn(self.x.dim(), |(i, f)| self.x[[perm[i], f]]);
        let mask = perm.iter().map(|&p| self.mask[p]).collect();
        Ok(Graph { x, a, mask })
    }

    /// Same structure with node features recomputed as one-hot degrees.
    pub fn with_degree_features(&self, feature_dim: usize) -> Self {
        Graph {
            x: degree_features(&self.a, &self.mask, feature_dim),
            a: self.a.clone(),
            mask: self.mask.clone(),
        }
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>, Vec<bool>) {
        (self.x, self.a, self.mask)
    }
}

/// One-hot degree features, the last bin collecting all degrees `≥ F − 1`.
pub fn degree_features(a: &Array2<f64>, mask: &[bool], feature_dim: usize) -> Array2<f64> {
    let n = mask.len();
    let mut x = Array2::zeros((n, feature_dim));
    if feature_dim == 0 {
        return x;
    }
    for i in 0..n {
        if mask[i] {
            let deg = a.row(i).iter().filter(|&&v| v != 0.0).count();
            x[[i, deg.min(feature_dim - 1)]] = 1.0;
        }
    }
    x
}

/// Thresholds a real adjacency: `> threshold` becomes 1, symmetrized by max,
/// diagonal and masked entries zeroed.
pub fn quantize(a: &Array2<f64>, mask: &[bool], threshold: f64) -> Array2<f64> {
    let n = mask.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j || !mask[i] || !mask[j] {
            0.0
        } else if a[[i, j]] > threshold || a[[j, i]] > threshold {
            1.0
        } else {
            0.0
        }
    })
}

pub const DEFAULT_QUANTIZE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub v_max: usize,
    pub feature_dim: usize,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        graphs: Vec<Graph>,
        v_max: usize,
        feature_dim: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        for (k, g) in graphs.iter().enumerate() {
            if g.v_max() != v_max || g.feature_dim() != feature_dim {
                return Err(Error::InvalidGraph(format!(
                    "graph {k} has shape ({}, {}), dataset expects ({v_max}, {feature_dim})",
                    g.v_max(),
                    g.feature_dim()
                )));
            }
        }
        Ok(Dataset {
            graphs,
            v_max,
            feature_dim,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::num_nodes).collect()
    }

    /// Splits off the last `fraction` of graphs (rounded down) as a second set.
    pub fn split(&self, fraction: f64) -> (Dataset, Dataset) {
        let n_tail = ((self.len() as f64) * fraction).floor() as usize;
        let cut = self.len() - n_tail.min(self.len());
        let head = Dataset {
            graphs: self.graphs[..cut].to_vec(),
            provenance: format!("{}[..{cut}]", self.provenance),
            ..self.clone_meta()
        };
        let tail = Dataset {
            graphs: self.graphs[cut..].to_vec(),
            provenance: format!("{}[{cut}..]", self.provenance),
            ..self.clone_meta()
        };
        (head, tail)
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            graphs: Vec::new(),
            v_max: self.v_max,
            feature_dim: self.feature_dim,
            provenance: self.provenance.clone(),
        }
    }
}
