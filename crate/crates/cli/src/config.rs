//! Run configuration: a TOML file with one section per module, overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scoregraph::graphs::{CommunityParams, GridParams};
use scoregraph::sampler::{CorrectorGate, SamplerConfig, DEFAULT_SNR_R};
use scoregraph::schedule::DEFAULT_TIME_FLOOR;
use scoregraph::scorenet::{TrainConfig, WeightMode};
use scoregraph::{Arch, NoiseSchedule, SdeKind};

use crate::CliError;

pub const OUT_ENV: &str = "SCOREGRAPH_OUT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Run directory; falls back to `$SCOREGRAPH_OUT`, then `runs/default`.
    pub out_dir: Option<PathBuf>,
    pub data: DataSpec,
    pub schedule: ScheduleSpec,
    pub arch: ArchSpec,
    pub train: TrainSpec,
    pub pseudo: PseudoSpec,
    pub sampler: SamplerSpec,
    pub eval: EvalSpec,
    pub diagnose: DiagnoseSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Community,
    Grid,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataKind,
    /// Source dataset when `kind = "file"`.
    pub path: Option<PathBuf>,
    pub count: usize,
    pub v_min: usize,
    pub v_max: usize,
    pub p_intra: f64,
    pub inter_rate: f64,
    pub grid_rows: [usize; 2],
    pub grid_cols: [usize; 2],
    pub feature_dim: usize,
    pub test_fraction: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        let c = CommunityParams::default();
        let g = GridParams::default();
        DataSpec {
            kind: DataKind::Community,
            path: None,
            count: c.count,
            v_min: c.v_min,
            v_max: c.v_max,
            p_intra: c.p_intra,
            inter_rate: c.inter_rate,
            grid_rows: [g.rows.0, g.rows.1],
            grid_cols: [g.cols.0, g.cols.1],
            feature_dim: c.feature_dim,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSchedule {
    pub sde: SdeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
}

impl ChannelSchedule {
    pub fn vp(beta_min: f64, beta_max: f64) -> Self {
        ChannelSchedule {
            sde: SdeKind::Vp,
            beta_min: Some(beta_min),
            beta_max: Some(beta_max),
            sigma_min: None,
            sigma_max: None,
        }
    }

    /// Missing bounds default to VP(0.1, 1.0) and VE(0.2, 1.0).
    pub fn build(&self, num_steps: usize) -> scoregraph::Result<NoiseSchedule> {
        match self.sde {
            SdeKind::Vp => NoiseSchedule::vp(
                self.beta_min.unwrap_or(0.1),
                self.beta_max.unwrap_or(1.0),
                num_steps,
            ),
            SdeKind::Ve => NoiseSchedule::ve(
                self.sigma_min.unwrap_or(0.2),
                self.sigma_max.unwrap_or(1.0),
                num_steps,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub num_steps: usize,
    pub node: ChannelSchedule,
    pub edge: ChannelSchedule,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            num_steps: 1000,
            node: ChannelSchedule::vp(0.1, 1.0),
            edge: ChannelSchedule::vp(0.1, 1.0),
        }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<(NoiseSchedule, NoiseSchedule), CliError> {
        let node = self
            .node
            .build(self.num_steps)
            .map_err(|e| CliError::Validation(format!("[schedule.node]: {e}")))?;
        let edge = self
            .edge
            .build(self.num_steps)
            .map_err(|e| CliError::Validation(format!("[schedule.edge]: {e}")))?;
        Ok((node, edge))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSpec {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub time_embed_dim: usize,
    pub edge_channels: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        let a = Arch::new(1);
        ArchSpec {
            hidden_dim: a.hidden_dim,
            num_layers: a.num_layers,
            time_embed_dim: a.time_embed_dim,
            edge_channels: a.edge_channels,
        }
    }
}

impl ArchSpec {
    pub fn build(&self, feature_dim: usize) -> Arch {
        Arch {
            feature_dim,
            hidden_dim: self.hidden_dim,
            num_layers: self.num_layers,
            time_embed_dim: self.time_embed_dim,
            edge_channels: self.edge_channels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSpec {
    Variance,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub step_size: f64,
    pub batch: usize,
    pub iterations: usize,
    pub t_floor: f64,
    pub weight_mode: WeightSpec,
    /// Global gradient-norm clip; `0` disables clipping.
    pub grad_clip: f64,
    /// Write a resumable checkpoint every this many iterations (`0`: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            step_size: 5e-3,
            batch: 16,
            iterations: 15_000,
            t_floor: DEFAULT_TIME_FLOOR,
            weight_mode: WeightSpec::Variance,
            grad_clip: 1.0,
            checkpoint_every: 0,
        }
    }
}

impl TrainSpec {
    pub fn build(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            step_size: self.step_size,
            batch: self.batch,
            iterations: self.iterations,
            t_floor: self.t_floor,
            weight_mode: match self.weight_mode {
                WeightSpec::Variance => WeightMode::Variance,
                WeightSpec::Uniform => WeightMode::Uniform,
            },
            seed,
            grad_clip: (self.grad_clip > 0.0).then_some(self.grad_clip),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoSpec {
    /// Number of generated graphs; `0` uses the training-set size.
    pub count: usize,
    /// Training iterations; `0` uses `[train] iterations`.
    pub iterations: usize,
    /// Reverse steps of the generating sampler; `0` uses `[sampler] steps`.
    pub steps: usize,
    /// Width of the pseudo network; `0` uses `[arch] hidden_dim`.
    pub hidden_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateSpec {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    pub steps: usize,
    /// Alignment iterations `M`. Signed so that negative values reach validation.
    pub m: i64,
    pub lambda1: f64,
    pub omega1: f64,
    pub lambda2: f64,
    pub omega2: f64,
    pub tc: f64,
    pub corrector: bool,
    pub snr_r: f64,
    pub gate: GateSpec,
    /// Graphs to generate; `0` uses the test-set size.
    pub count: usize,
    /// Sampling seed; defaults to the global seed.
    pub seed: Option<u64>,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        let oc = SamplerConfig::oc(1000, 0);
        SamplerSpec {
            steps: oc.n_steps,
            m: 0,
            lambda1: oc.lambda1,
            omega1: oc.omega1,
            lambda2: oc.lambda2,
            omega2: oc.omega2,
            tc: oc.t_c,
            corrector: oc.corrector,
            snr_r: DEFAULT_SNR_R,
            gate: GateSpec::Below,
            count: 0,
            seed: None,
        }
    }
}

impl SamplerSpec {
    pub fn build(&self, default_seed: u64) -> Result<SamplerConfig, CliError> {
        if self.m < 0 {
            return Err(CliError::Validation(format!(
                "[sampler] m (--M) must be ≥ 0, got {}",
                self.m
            )));
        }
        let cfg = SamplerConfig {
            n_steps: self.steps,
            m: self.m as usize,
            lambda1: self.lambda1,
            omega1: self.omega1,
            lambda2: self.lambda2,
            omega2: self.omega2,
            t_c: self.tc,
            corrector: self.corrector,
            snr_r: self.snr_r,
            seed: self.seed.unwrap_or(default_seed),
            gate: match self.gate {
                GateSpec::Below => CorrectorGate::AtOrBelow,
                GateSpec::Above => CorrectorGate::Above,
            },
        };
        cfg.validate()
            .map_err(|e| CliError::Validation(format!("[sampler]: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub sigma: f64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            sigma: scoregraph::metrics::DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSpec {
    /// Attack times for the perturbation sweep; empty disables it.
    pub sweep: Vec<f64>,
    /// Start the sweep from forward-perturbed training graphs instead of noise.
    pub sweep_true_start: bool,
    pub oracle_mean: f64,
    pub oracle_var: f64,
    pub oracle_chains: usize,
    pub oracle_m: usize,
}

impl Default for DiagnoseSpec {
    fn default() -> Self {
        DiagnoseSpec {
            sweep: Vec::new(),
            sweep_true_start: false,
            oracle_mean: 1.0,
            oracle_var: 0.5,
            oracle_chains: 10_000,
            oracle_m: 500,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Run directory: the configured one, else `$SCOREGRAPH_OUT`, else `runs/default`.
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs/default"))
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let d = &self.data;
        if d.kind == DataKind::File {
            match &d.path {
                None => return bad("[data] kind = \"file\" needs a path".into()),
                Some(p) if !p.exists() => {
                    return bad(format!("[data] path {} does not exist", p.display()))
                }
                _ => {}
            }
        }
        if !(0.0..1.0).contains(&d.test_fraction) {
            return bad(format!(
                "[data] test_fraction must lie in [0, 1), got {}",
                d.test_fraction
            ));
        }
        self.schedule.build()?;
        self.arch
            .build(d.feature_dim.max(1))
            .validate()
            .map_err(|e| CliError::Validation(format!("[arch]: {e}")))?;
        self.train
            .build(self.seed)
            .validate()
            .map_err(|e| CliError::Validation(format!("[train]: {e}")))?;
        self.sampler.build(self.seed)?;
        if !(self.eval.sigma > 0.0) {
            return bad(format!("[eval] sigma must be > 0, got {}", self.eval.sigma));
        }
        if !(self.diagnose.oracle_var >= 0.0) {
            return bad("[diagnose] oracle_var must be ≥ 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn sections_parse_and_unknown_keys_fail() {
        let c: RunConfig = toml::from_str(
            "seed = 3\n[schedule.edge]\nsde = \"ve\"\nsigma_min = 0.2\nsigma_max = 1.0\n[sampler]\nm = 400\nlambda1 = 0.2\nomega1 = 0.998\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.schedule.edge.sde, SdeKind::Ve);
        assert_eq!(c.schedule.node, ScheduleSpec::default().node);
        assert_eq!(c.sampler.m, 400);
        assert!(toml::from_str::<RunConfig>("[sampler]\nbogus = 1\n").is_err());
    }

    #[test]
    fn validation_rejects_bad_sampler_values() {
        for patch in ["omega1 = 0.0", "m = -1", "tc = 1.5", "omega2 = 0.0"] {
            let c: RunConfig = toml::from_str(&format!("[sampler]\n{patch}\n")).unwrap();
            let err = c.validate().unwrap_err();
            assert!(matches!(err, CliError::Validation(_)), "{patch}");
        }
    }
}
