//! Score-difference correction and the pseudo-model pipeline.
//!
//! Given the pretrained score `s_θ` and a pseudo score `s_ψ` trained on
//! samples drawn from `s_θ`, the corrected score is
//!
//! ```text
//! s ← (s_θ + λ (s_θ − s_ψ)) / ω
//! ```
//!
//! `λ = 0` leaves the direction untouched and reduces to plain rescaling by `ω`.

use ndarray::{Array, Dimension, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Dataset;
use crate::sampler::{generate_graphs, GraphShape, SamplerConfig};
use crate::schedule::{check_same_shape, NoiseSchedule};
use crate::scorenet::{train, Arch, ModelRole, ScoreModel, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionParams {
    pub lambda: f64,
    pub omega: f64,
}

impl CorrectionParams {
    pub const IDENTITY: CorrectionParams = CorrectionParams {
        lambda: 0.0,
        omega: 1.0,
    };

    pub fn new(lambda: f64, omega: f64) -> Result<Self> {
        let p = CorrectionParams { lambda, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and ≥ 0, got {}",
                self.lambda
            )));
        }
        if self.omega == 0.0 || !self.omega.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "omega must be finite and nonzero, got {}",
                self.omega
            )));
        }
        Ok(())
    }

    /// Whether the pseudo score is needed at all.
    pub fn uses_pseudo(&self) -> bool {
        self.lambda != 0.0
    }
}

/// `(s_θ + λ (s_θ − s_ψ)) / ω`, elementwise.
pub fn corrected_score<D: Dimension>(
    s_theta: &Array<f64, D>,
    s_psi: &Array<f64, D>,
    p: CorrectionParams,
) -> Result<Array<f64, D>> {
    check_same_shape(s_theta.shape(), s_psi.shape())?;
    p.validate()?;
    if !p.uses_pseudo() {
        // exact, including signed zeros
        return Ok(rescaled(s_theta.clone(), p.omega));
    }
    Ok(Zip::from(s_theta)
        .and(s_psi)
        .map_collect(|&a, &b| (a + p.lambda * (a - b)) / p.omega))
}

/// Rescaling-only form used when `λ = 0`, so `s_ψ` is never evaluated.
pub(crate) fn rescaled<D: Dimension>(s_theta: Array<f64, D>, omega: f64) -> Array<f64, D> {
    if omega == 1.0 {
        s_theta
    } else {
        s_theta.mapv_into(|v| v / omega)
    }
}

/// Samples `n` graphs from `model` with an uncorrected sampler configuration
/// and packs them, quantized, into a dataset.
pub fn generate_pseudo_dataset(
    model: &ScoreModel,
    n: usize,
    schedule_x: &NoiseSchedule,
    schedule_a: &NoiseSchedule,
    baseline: &SamplerConfig,
    shape: &GraphShape,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "pseudo dataset size must be > 0".into(),
        ));
    }
    if baseline.needs_pseudo() {
        return Err(Error::InvalidArgument(
            "pseudo data must come from an uncorrected sampler (lambda1 = lambda2 = 0)".into(),
        ));
    }
    let cfg = SamplerConfig { seed, ..*baseline };
    let mut data = generate_graphs(model, None, &cfg, schedule_x, schedule_a, shape, n)?;
    data.provenance = format!("pseudo: baseline sampler, n = {n}, seed = {seed}");
    Ok(data)
}

/// Trains a fresh network of architecture `arch` on pseudo data; the result is tagged as a pseudo model.
pub fn train_pseudo(
    data: &Dataset,
    arch: Arch,
    schedule_x: NoiseSchedule,
    schedule_a: NoiseSchedule,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("pseudo dataset is empty".into()));
    }
    let init = ScoreModel::new(
        arch,
        schedule_x,
        schedule_a,
        crate::rng::derive_seed(cfg.seed, 0x5053),
    )?;
    let mut out = train(init, data, cfg)?;
    out.model.role = ModelRole::Pseudo;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array2};
    use proptest::prelude::*;

    #[test]
    fn identity_and_rescaling() {
        let s = arr1(&[1.5, -0.25, 3.0]);
        let psi = arr1(&[9.0, 9.0, 9.0]);
        assert_eq!(
            corrected_score(&s, &psi, CorrectionParams::IDENTITY).unwrap(),
            s
        );
        let half = corrected_score(&s, &psi, CorrectionParams::new(0.0, 2.0).unwrap()).unwrap();
        assert_eq!(half, s.mapv(|v| v / 2.0));
        assert_eq!(rescaled(s.clone(), 1.0), s);
    }

    #[test]
    fn hand_fixture() {
        let out = corrected_score(
            &arr1(&[2.0, 0.0]),
            &arr1(&[1.0, 0.0]),
            CorrectionParams::new(1.0, 2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(out, arr1(&[1.5, 0.0]));
    }

    #[test]
    fn rejects_bad_parameters_and_shapes() {
        assert!(CorrectionParams::new(0.1, 0.0).is_err());
        assert!(CorrectionParams::new(-0.1, 1.0).is_err());
        assert!(corrected_score(
            &arr1(&[1.0]),
            &arr1(&[1.0, 2.0]),
            CorrectionParams::IDENTITY
        )
        .is_err());
    }

    #[test]
    fn sandwich_recovers_truth() {
        let mut r = crate::rng::rng_from_seed(1);
        let truth = crate::rng::normal_matrix(&mut r, 6, 4);
        let bias = crate::rng::normal_matrix(&mut r, 6, 4);
        let theta = &truth + &bias;
        let psi = &truth + &(2.0 * &bias);
        let out = corrected_score(&theta, &psi, CorrectionParams::new(1.0, 1.0).unwrap()).unwrap();
        let err = (&out - &truth)
            .mapv(f64::abs)
            .fold(0.0f64, |m, &v| m.max(v));
        assert!(err < 1e-12, "{err}");
    }

    proptest! {
        #[test]
        fn linear_in_inputs(
            u in prop::collection::vec(-10.0f64..10.0, 5),
            v in prop::collection::vec(-10.0f64..10.0, 5),
            a in -5.0f64..5.0,
            lambda in 0.0f64..3.0,
            omega in 0.1f64..3.0,
        ) {
            let p = CorrectionParams::new(lambda, omega).unwrap();
            let (u, v) = (arr1(&u), arr1(&v));
            let lhs = corrected_score(&(a * &u), &(a * &v), p).unwrap();
            let rhs = a * corrected_score(&u, &v, p).unwrap();
            let expanded = ((1.0 + lambda) / omega) * &u - (lambda / omega) * &v;
            let base = corrected_score(&u, &v, p).unwrap();
            for k in 0..5 {
                prop_assert!((lhs[k] - rhs[k]).abs() <= 1e-9 * (1.0 + rhs[k].abs()));
                prop_assert!((base[k] - expanded[k]).abs() <= 1e-9 * (1.0 + base[k].abs()));
            }
        }

        #[test]
        fn identity_is_bitwise(vals in prop::collection::vec(-1e6f64..1e6, 9)) {
            let s = Array2::from_shape_vec((3, 3), vals).unwrap();
            let psi = Array2::from_elem((3, 3), 1.0);
            prop_assert_eq!(corrected_score(&s, &psi, CorrectionParams::IDENTITY).unwrap(), s);
        }
    }
}
