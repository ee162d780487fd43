//! Gaussian data with closed-form marginal scores.

use ndarray::{Array2, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::graphs::{node_mask, pair_mask};
use crate::schedule::NoiseSchedule;
use crate::scorenet::ScoreFn;

/// Diagonal Gaussian `N(mu, diag(var))`. A one-element vector broadcasts over
/// every coordinate; otherwise the length must match the flattened state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianData {
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

impl GaussianData {
    pub fn new(mu: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || var.is_empty() {
            return Err(Error::InvalidArgument(
                "mean and variance must be nonempty".into(),
            ));
        }
        if var.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument(
                "variances must be finite and ≥ 0".into(),
            ));
        }
        Ok(GaussianData { mu, var })
    }

    pub fn scalar(mu: f64, var: f64) -> Result<Self> {
        Self::new(vec![mu], vec![var])
    }

    fn at(v: &[f64], k: usize) -> f64 {
        if v.len() == 1 {
            v[0]
        } else {
            v[k]
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        for len in [self.mu.len(), self.var.len()] {
            if len != 1 && len != n {
                return Err(Error::ShapeMismatch {
                    left: vec![len],
                    right: vec![n],
                });
            }
        }
        Ok(())
    }

    /// Mean and variance of the marginal `q_t = N(u_t mu, u_t² var + var_t)` at coordinate `k`.
    pub fn marginal(&self, s: &NoiseSchedule, t: f64, k: usize) -> Result<(f64, f64)> {
        let kp = s.kernel_params(t)?;
        let m = kp.mean_coef;
        Ok((
            m * Self::at(&self.mu, k),
            m * m * Self::at(&self.var, k) + kp.var,
        ))
    }
}

/// Score of the forward marginal at time `t`, elementwise
/// `−(x − u_t mu) / (u_t² var + var_t)`.
pub fn true_marginal_score(
    g: &GaussianData,
    s: &NoiseSchedule,
    x: ArrayView1<'_, f64>,
    t: f64,
) -> Result<Vec<f64>> {
    g.check_len(x.len())?;
    let kp = s.kernel_params(t)?;
    let u = kp.mean_coef;
    x.iter()
        .enumerate()
        .map(|(k, &xi)| {
            let total = u * u * GaussianData::at(&g.var, k) + kp.var;
            if total <= 0.0 {
                return Err(Error::Singular { t });
            }
            Ok(-(xi - u * GaussianData::at(&g.mu, k)) / total)
        })
        .collect()
}

/// Exact score function: node features and adjacency entries are treated as
/// independent Gaussian channels, each diffused under its own schedule.
#[derive(Debug, Clone)]
pub struct OracleScore {
    pub x: GaussianData,
    pub a: GaussianData,
    pub schedule_x: NoiseSchedule,
    pub schedule_a: NoiseSchedule,
}

impl OracleScore {
    pub fn new(
        x: GaussianData,
        a: GaussianData,
        schedule_x: NoiseSchedule,
        schedule_a: NoiseSchedule,
    ) -> Self {
        OracleScore {
            x,
            a,
            schedule_x,
            schedule_a,
        }
    }

    fn channel(
        g: &GaussianData,
        s: &NoiseSchedule,
        m: &Array2<f64>,
        mask: &Array2<f64>,
        t: f64,
    ) -> Result<Array2<f64>> {
        let flat = m.as_standard_layout();
        let flat = flat
            .view()
            .into_shape_with_order(m.len())
            .expect("contiguous");
        let score = true_marginal_score(g, s, flat, t)?;
        let mut out = Array2::from_shape_vec(m.dim(), score).expect("same length");
        Zip::from(&mut out).and(mask).for_each(|o, &w| *o *= w);
        Ok(out)
    }
}

impl ScoreFn for OracleScore {
    fn score(
        &self,
        x: &Array2<f64>,
        a: &Array2<f64>,
        mask: &[bool],
        t: f64,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let n = mask.len();
        if x.nrows() != n || a.dim() != (n, n) {
            return Err(Error::ShapeMismatch {
                left: vec![x.nrows(), a.nrows(), a.ncols()],
                right: vec![n, n, n],
            });
        }
        let nm = node_mask(mask).insert_axis(ndarray::Axis(1));
        let nm = nm.broadcast(x.dim()).expect("column broadcast").to_owned();
        let sx = Self::channel(&self.x, &self.schedule_x, x, &nm, t)?;
        let sa = Self::channel(&self.a, &self.schedule_a, a, &pair_mask(mask), t)?;
        Ok((sx, sa))
    }
}
