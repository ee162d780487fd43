//! Continuous-time noise schedules.
//!
//! Both SDE families perturb data with a Gaussian kernel
//! `q(x_t | x_0) = N(u_t x_0, var_t I)` on the unit time interval:
//!
//! - VP: `β(t) = β_min + t (β_max − β_min)`,
//!   `u_t = exp(−¼ t² (β_max − β_min) − ½ t β_min)`, `var_t = 1 − u_t²`.
//! - VE: `u_t = 1`, `var_t = σ_min² (σ_max / σ_min)^{2t}`.
//!
//! Sampling uses the discrete grid `t = i / N` and starts at the horizon
//! `T = (N − 1) / N`. [`NoiseSchedule::max_perturbation`] reports the kernel at
//! `t = 1`, the endpoint of the forward process.
//!
//! The signal-to-noise ratio is `u_t² / var_t`.

use ndarray::{Array, Dimension, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest training/evaluation time; keeps `var_t` away from zero for VP.
pub const DEFAULT_TIME_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdeKind {
    Vp,
    Ve,
}

impl SdeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SdeKind::Vp => "vp",
            SdeKind::Ve => "ve",
        }
    }
}

impl std::str::FromStr for SdeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vp" | "vpsde" => Ok(SdeKind::Vp),
            "ve" | "vesde" => Ok(SdeKind::Ve),
            other => Err(Error::InvalidSchedule(format!(
                "unknown sde kind `{other}`"
            ))),
        }
    }
}

/// Mean coefficient and variance of the perturbation kernel at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub mean_coef: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: SdeKind,
    pub beta_min: f64,
    pub beta_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub num_steps: usize,
    pub horizon: f64,
}

impl NoiseSchedule {
    pub fn vp(beta_min: f64, beta_max: f64, num_steps: usize) -> Result<Self> {
        Self::new(SdeKind::Vp, beta_min, beta_max, num_steps)
    }

    pub fn ve(sigma_min: f64, sigma_max: f64, num_steps: usize) -> Result<Self> {
        Self::new(SdeKind::Ve, sigma_min, sigma_max, num_steps)
    }

    /// Builds a schedule from its two bounds, interpreted as `(β_min, β_max)`
    /// for VP and `(σ_min, σ_max)` for VE. The horizon defaults to `(N − 1) / N`.
    pub fn new(kind: SdeKind, lo: f64, hi: f64, num_steps: usize) -> Result<Self> {
        let horizon = if num_steps >= 2 {
            (num_steps - 1) as f64 / num_steps as f64
        } else {
            1.0
        };
        let (beta_min, beta_max, sigma_min, sigma_max) = match kind {
            SdeKind::Vp => (lo, hi, 0.0, 0.0),
            SdeKind::Ve => (0.0, 0.0, lo, hi),
        };
        let s = NoiseSchedule {
            kind,
            beta_min,
            beta_max,
            sigma_min,
            sigma_max,
            num_steps,
            horizon,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    /// Same bounds, different step count (horizon recomputed).
    pub fn with_steps(&self, num_steps: usize) -> Result<Self> {
        let (lo, hi) = self.bounds();
        Self::new(self.kind, lo, hi, num_steps)
    }

    /// `(β_min, β_max)` or `(σ_min, σ_max)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            SdeKind::Vp => (self.beta_min, self.beta_max),
            SdeKind::Ve => (self.sigma_min, self.sigma_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.beta_min,
            self.beta_max,
            self.sigma_min,
            self.sigma_max,
            self.horizon,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidSchedule("non-finite parameter".into()));
        }
        match self.kind {
            SdeKind::Vp => {
                if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max) {
                    return Err(Error::InvalidSchedule(format!(
                        "VP requires 0 < beta_min <= beta_max, got ({}, {})",
                        self.beta_min, self.beta_max
                    )));
                }
            }
            SdeKind::Ve => {
                if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max) {
                    return Err(Error::InvalidSchedule(format!(
                        "VE requires 0 < sigma_min < sigma_max, got ({}, {})",
                        self.sigma_min, self.sigma_max
                    )));
                }
            }
        }
        if self.num_steps < 2 {
            return Err(Error::InvalidSchedule(format!(
                "num_steps must be at least 2, got {}",
                self.num_steps
            )));
        }
        if !(self.horizon > 0.0 && self.horizon <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "horizon must lie in (0, 1], got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    fn check_unit(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, range: "[0, 1]" })
        }
    }

    /// Drift rate `β(t)` of a VP schedule.
    pub fn beta_at(&self, t: f64) -> Result<f64> {
        if self.kind != SdeKind::Vp {
            return Err(Error::WrongKind { expected: "VP" });
        }
        Self::check_unit(t)?;
        Ok(self.beta_min + t * (self.beta_max - self.beta_min))
    }

    /// Per-step drift `β(t) / N` used by the discretized reverse predictor.
    pub fn discrete_beta(&self, t: f64) -> Result<f64> {
        Ok(self.beta_at(t)? / self.num_steps as f64)
    }

    pub fn kernel_params(&self, t: f64) -> Result<KernelParams> {
        Self::check_unit(t)?;
        Ok(self.kernel_unchecked(t))
    }

    pub(crate) fn kernel_unchecked(&self, t: f64) -> KernelParams {
        match self.kind {
            SdeKind::Vp => {
                let log_mean =
                    -0.25 * t * t * (self.beta_max - self.beta_min) - 0.5 * t * self.beta_min;
                KernelParams {
                    mean_coef: log_mean.exp(),
                    // 1 − exp(2·log_mean), computed without cancellation
                    var: -(2.0 * log_mean).exp_m1(),
                }
            }
            SdeKind::Ve => KernelParams {
                mean_coef: 1.0,
                var: self.sigma_min.powi(2) * (self.sigma_max / self.sigma_min).powf(2.0 * t),
            },
        }
    }

    /// Kernel at the end of the forward process, `t = 1`.
    pub fn max_perturbation(&self) -> KernelParams {
        self.kernel_unchecked(1.0)
    }

    pub fn snr(&self, t: f64) -> Result<f64> {
        let k = self.kernel_params(t)?;
        if k.var <= 0.0 {
            return Err(Error::Singular { t });
        }
        Ok(k.mean_coef * k.mean_coef / k.var)
    }

    /// `u_t · x0 + √var_t · eps`.
    pub fn perturb<D: Dimension>(
        &self,
        x0: &Array<f64, D>,
        t: f64,
        eps: &Array<f64, D>,
    ) -> Result<Array<f64, D>> {
        check_same_shape(x0.shape(), eps.shape())?;
        let k = self.kernel_params(t)?;
        let sd = k.var.sqrt();
        Ok(Zip::from(x0)
            .and(eps)
            .map_collect(|&x, &e| k.mean_coef * x + sd * e))
    }

    /// Score of the perturbation kernel, `−(x_t − u_t x0) / var_t`.
    pub fn cond_score<D: Dimension>(
        &self,
        x_t: &Array<f64, D>,
        x0: &Array<f64, D>,
        t: f64,
    ) -> Result<Array<f64, D>> {
        check_same_shape(x_t.shape(), x0.shape())?;
        let k = self.kernel_params(t)?;
        if k.var <= 0.0 {
            return Err(Error::Singular { t });
        }
        Ok(Zip::from(x_t)
            .and(x0)
            .map_collect(|&xt, &x| -(xt - k.mean_coef * x) / k.var))
    }

    /// Times visited by the reverse sampler, `i / N` for `i = N − 1, …, 0`.
    pub fn reverse_times(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.num_steps;
        (0..n).rev().map(move |i| (i, i as f64 / n as f64))
    }
}

pub(crate) fn check_same_shape(a: &[usize], b: &[usize]) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            left: a.to_vec(),
            right: b.to_vec(),
        })
    }
}
