//! Reverse-time sampling: predictor, Langevin corrector, reverse-start
//! alignment and the full corrected sampler.
//!
//! A run over a batch of chains proceeds as
//!
//! 1. draw `X_T`, `A_T ~ N(0, I)` (masked, `A` symmetric), with `T = (N − 1) / N`;
//! 2. `M` Langevin steps at `T` on the score corrected with `(λ₁, ω₁)`;
//! 3. for `i = N − 1, …, 0` at `t = i / N`: one predictor step on the score
//!    corrected with `(λ₂, ω₂)`, then, if the corrector is enabled and the
//!    gate admits `t`, one Langevin step on a freshly evaluated corrected score.
//!
//! Langevin step sizes follow `η = 2 (r ‖ε‖ / ‖s‖)²` where both norms are
//! batch means of per-chain norms, computed separately for the node and edge
//! channels at every step.
//!
//! Chain `k` draws all of its noise from `rng::stream(seed, k)` in a fixed
//! order, so results do not depend on thread count.

use ndarray::{Array, Array2, Dimension, Zip};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correction::{corrected_score, rescaled, CorrectionParams};
use crate::error::{Error, Result};
use crate::graphs::{node_mask, pair_mask, quantize, Dataset, Graph, DEFAULT_QUANTIZE_THRESHOLD};
use crate::rng::{self, SeededRng};
use crate::schedule::{check_same_shape, NoiseSchedule, SdeKind};
use crate::scorenet::ScoreFn;

pub const DEFAULT_SNR_R: f64 = 0.16;
pub const ETA_MIN: f64 = 1e-8;
pub const ETA_MAX: f64 = 1e2;

const ATTACK_STREAM: u64 = 0xA77A;
const NODE_COUNT_STREAM: u64 = 0x0C07;

/// Which side of `t_c` receives corrector steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectorGate {
    /// `t ≤ t_c`
    #[default]
    AtOrBelow,
    /// `t > t_c`
    Above,
}

impl CorrectorGate {
    pub fn admits(self, t: f64, t_c: f64) -> bool {
        match self {
            CorrectorGate::AtOrBelow => t <= t_c,
            CorrectorGate::Above => t > t_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Discretization steps `N`.
    pub n_steps: usize,
    /// Alignment iterations `M`.
    pub m: usize,
    pub lambda1: f64,
    pub omega1: f64,
    pub lambda2: f64,
    pub omega2: f64,
    pub t_c: f64,
    pub corrector: bool,
    pub snr_r: f64,
    pub seed: u64,
    #[serde(default)]
    pub gate: CorrectorGate,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig::oc(1000, 0)
    }
}

impl SamplerConfig {
    /// Predictor only, no alignment or correction.
    pub fn oc(n_steps: usize, seed: u64) -> Self {
        SamplerConfig {
            n_steps,
            m: 0,
            lambda1: 0.0,
            omega1: 1.0,
            lambda2: 0.0,
            omega2: 1.0,
            t_c: 1.0,
            corrector: false,
            snr_r: DEFAULT_SNR_R,
            seed,
            gate: CorrectorGate::AtOrBelow,
        }
    }

    /// Predictor plus a Langevin corrector at every step.
    pub fn wc(n_steps: usize, seed: u64) -> Self {
        SamplerConfig {
            corrector: true,
            t_c: 1.0,
            ..Self::oc(n_steps, seed)
        }
    }

    pub fn align(&self) -> CorrectionParams {
        CorrectionParams {
            lambda: self.lambda1,
            omega: self.omega1,
        }
    }

    pub fn in_loop(&self) -> CorrectionParams {
        CorrectionParams {
            lambda: self.lambda2,
            omega: self.omega2,
        }
    }

    pub fn needs_pseudo(&self) -> bool {
        self.lambda1 != 0.0 || self.lambda2 != 0.0
    }

    pub fn horizon(&self) -> f64 {
        (self.n_steps - 1) as f64 / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_steps < 2 {
            return bad(format!("steps N must be ≥ 2, got {}", self.n_steps));
        }
        for (name, p) in [
            ("lambda1/omega1", self.align()),
            ("lambda2/omega2", self.in_loop()),
        ] {
            p.validate()
                .map_err(|e| Error::InvalidArgument(format!("{name}: {e}")))?;
        }
        if !(0.0..=1.0).contains(&self.t_c) {
            return bad(format!("t_c must lie in [0, 1], got {}", self.t_c));
        }
        if !(self.snr_r > 0.0 && self.snr_r.is_finite()) {
            return bad(format!("snr_r must be > 0, got {}", self.snr_r));
        }
        Ok(())
    }
}

/// `x + (η/2) s + √η ε`.
pub fn langevin_step<D: Dimension>(
    x: &Array<f64, D>,
    score: &Array<f64, D>,
    eta: f64,
    eps: &Array<f64, D>,
) -> Result<Array<f64, D>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Langevin step size must be > 0, got {eta}"
        )));
    }
    check_same_shape(x.shape(), score.shape())?;
    check_same_shape(x.shape(), eps.shape())?;
    let (h, sq) = (0.5 * eta, eta.sqrt());
    Ok(Zip::from(x)
        .and(score)
        .and(eps)
        .map_collect(|&x, &s, &e| x + h * s + sq * e))
}

/// `η = 2 (r · noise_norm / score_norm)²`, clamped to `[ETA_MIN, ETA_MAX]`.
pub fn langevin_eta(score_norm: f64, noise_norm: f64, snr_r: f64) -> f64 {
    if !(score_norm > 0.0) || !score_norm.is_finite() {
        return ETA_MIN;
    }
    let eta = 2.0 * (snr_r * noise_norm / score_norm).powi(2);
    if eta.is_nan() {
        ETA_MIN
    } else {
        eta.clamp(ETA_MIN, ETA_MAX)
    }
}

/// `(2 − √(1 − β)) x + β s + √β ε`.
pub fn predictor_step_vp<D: Dimension>(
    x: &Array<f64, D>,
    score: &Array<f64, D>,
    beta: f64,
    eps: &Array<f64, D>,
) -> Result<Array<f64, D>> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "predictor beta must lie in [0, 1), got {beta}"
        )));
    }
    check_same_shape(x.shape(), score.shape())?;
    check_same_shape(x.shape(), eps.shape())?;
    let c = 2.0 - (1.0 - beta).sqrt();
    let sq = beta.sqrt();
    Ok(Zip::from(x)
        .and(score)
        .and(eps)
        .map_collect(|&x, &s, &e| c * x + beta * s + sq * e))
}

/// `x + (var_t − var_prev) s + √(var_t − var_prev) ε`.
pub fn predictor_step_ve<D: Dimension>(
    x: &Array<f64, D>,
    score: &Array<f64, D>,
    var_t: f64,
    var_prev: f64,
    eps: &Array<f64, D>,
) -> Result<Array<f64, D>> {
    if !(var_prev >= 0.0 && var_t >= var_prev) {
        return Err(Error::InvalidArgument(format!(
            "VE predictor needs var_t ≥ var_prev ≥ 0, got {var_t} and {var_prev}"
        )));
    }
    check_same_shape(x.shape(), score.shape())?;
    check_same_shape(x.shape(), eps.shape())?;
    let d = var_t - var_prev;
    let sq = d.sqrt();
    Ok(Zip::from(x)
        .and(score)
        .and(eps)
        .map_collect(|&x, &s, &e| x + d * s + sq * e))
}

/// One graph state `(X, A)` with its node mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub x: Array2<f64>,
    pub a: Array2<f64>,
    pub mask: Vec<bool>,
}

impl Chain {
    fn is_finite(&self) -> bool {
        self.x.iter().chain(self.a.iter()).all(|v| v.is_finite())
    }
}

/// A chain together with its private noise stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub chain: Chain,
    rng: SeededRng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Align,
    Predictor,
    Corrector,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Align => "alignment",
            Phase::Predictor => "predictor",
            Phase::Corrector => "corrector",
        }
    }
}

/// Per-step record: batch-mean norms of the score that drove the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub phase: Phase,
    /// Alignment iteration `j` or loop index `i`.
    pub index: usize,
    pub t: f64,
    pub score_norm_x: f64,
    pub score_norm_a: f64,
    /// Step sizes of Langevin updates (`None` for predictor steps).
    pub eta: Option<(f64, f64)>,
}

type Scores = Vec<(Array2<f64>, Array2<f64>)>;

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn mean_norms(scores: &Scores) -> (f64, f64) {
    let n = scores.len().max(1) as f64;
    let (mut x, mut a) = (0.0, 0.0);
    for (sx, sa) in scores {
        x += frob(sx);
        a += frob(sa);
    }
    (x / n, a / n)
}

fn draw_noise(r: &mut SeededRng, mask: &[bool], feature_dim: usize) -> (Array2<f64>, Array2<f64>) {
    let n = mask.len();
    let nm = node_mask(mask).insert_axis(ndarray::Axis(1));
    let ex = rng::normal_matrix(r, n, feature_dim) * &nm;
    let ea = rng::symmetric_normal(r, n) * &pair_mask(mask);
    (ex, ea)
}

/// Batch sampler over a score model and an optional pseudo model.
pub struct Sampler<'a> {
    model: &'a dyn ScoreFn,
    pseudo: Option<&'a dyn ScoreFn>,
    cfg: SamplerConfig,
    schedule_x: NoiseSchedule,
    schedule_a: NoiseSchedule,
    attack: Option<usize>,
}

impl<'a> Sampler<'a> {
    /// Schedules are re-discretized to `cfg.n_steps`.
    pub fn new(
        model: &'a dyn ScoreFn,
        pseudo: Option<&'a dyn ScoreFn>,
        cfg: SamplerConfig,
        schedule_x: &NoiseSchedule,
        schedule_a: &NoiseSchedule,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.needs_pseudo() && pseudo.is_none() {
            return Err(Error::InvalidArgument(
                "lambda1 or lambda2 > 0 requires a pseudo score model".into(),
            ));
        }
        Ok(Sampler {
            model,
            pseudo,
            cfg,
            schedule_x: schedule_x.with_steps(cfg.n_steps)?,
            schedule_a: schedule_a.with_steps(cfg.n_steps)?,
            attack: None,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Adds `z ~ N(0, I)` to the score at the single predictor step nearest `t_attack`.
    pub fn with_attack(mut self, t_attack: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t_attack) {
            return Err(Error::TimeOutOfRange {
                t: t_attack,
                range: "[0, 1]",
            });
        }
        let n = self.cfg.n_steps;
        self.attack = Some(((t_attack * n as f64).round() as usize).min(n - 1));
        Ok(self)
    }

    /// Loop index receiving the score perturbation, if any.
    pub fn attack_step(&self) -> Option<usize> {
        self.attack
    }

    /// Chains started from `N(0, I)`, chain `k` seeded with `stream(seed, k)`.
    pub fn init(&self, masks: &[Vec<bool>], feature_dim: usize) -> Vec<ChainState> {
        masks
            .iter()
            .enumerate()
            .map(|(k, mask)| {
                let mut r = rng::stream(self.cfg.seed, k as u64);
                let (x, a) = draw_noise(&mut r, mask, feature_dim);
                ChainState {
                    chain: Chain {
                        x,
                        a,
                        mask: mask.clone(),
                    },
                    rng: r,
                }
            })
            .collect()
    }

    /// Chains started from given states, chain `k` seeded with `stream(seed, k)`.
    pub fn start_from(&self, chains: Vec<Chain>) -> Vec<ChainState> {
        chains
            .into_iter()
            .enumerate()
            .map(|(k, chain)| ChainState {
                chain,
                rng: rng::stream(self.cfg.seed, k as u64),
            })
            .collect()
    }

    fn raw_scores(&self, f: &dyn ScoreFn, states: &[ChainState], t: f64) -> Result<Scores> {
        states
            .par_iter()
            .map(|s| f.score(&s.chain.x, &s.chain.a, &s.chain.mask, t))
            .collect()
    }

    fn scores(&self, states: &[ChainState], t: f64, p: CorrectionParams) -> Result<Scores> {
        let theta = self.raw_scores(self.model, states, t)?;
        if !p.uses_pseudo() {
            return Ok(theta
                .into_iter()
                .map(|(x, a)| (rescaled(x, p.omega), rescaled(a, p.omega)))
                .collect());
        }
        let pseudo = self.pseudo.expect("checked in Sampler::new");
        let psi = self.raw_scores(pseudo, states, t)?;
        theta
            .into_iter()
            .zip(psi)
            .map(|((tx, ta), (px, pa))| {
                Ok((corrected_score(&tx, &px, p)?, corrected_score(&ta, &pa, p)?))
            })
            .collect()
    }

    fn check(states: &[ChainState], phase: Phase, step: usize) -> Result<()> {
        if states.iter().all(|s| s.chain.is_finite()) {
            Ok(())
        } else {
            Err(Error::SamplerNonFinite {
                phase: phase.name(),
                step,
            })
        }
    }

    fn langevin(
        &self,
        states: &mut [ChainState],
        t: f64,
        p: CorrectionParams,
        phase: Phase,
        index: usize,
        trace: &mut Option<&mut Vec<StepRecord>>,
    ) -> Result<()> {
        let scores = self.scores(states, t, p)?;
        let noise: Vec<_> = states
            .iter_mut()
            .map(|s| {
                let f = s.chain.x.ncols();
                draw_noise(&mut s.rng, &s.chain.mask, f)
            })
            .collect();
        let (sn_x, sn_a) = mean_norms(&scores);
        let (nn_x, nn_a) = mean_norms(&noise);
        let eta_x = langevin_eta(sn_x, nn_x, self.cfg.snr_r);
        let eta_a = langevin_eta(sn_a, nn_a, self.cfg.snr_r);
        for ((s, (gx, ga)), (ex, ea)) in states.iter_mut().zip(&scores).zip(&noise) {
            s.chain.x = langevin_step(&s.chain.x, gx, eta_x, ex)?;
            s.chain.a = langevin_step(&s.chain.a, ga, eta_a, ea)?;
        }
        if let Some(tr) = trace {
            tr.push(StepRecord {
                phase,
                index,
                t,
                score_norm_x: sn_x,
                score_norm_a: sn_a,
                eta: Some((eta_x, eta_a)),
            });
        }
        Self::check(states, phase, index)
    }

    /// `M` corrected Langevin steps at `T = (N − 1) / N`.
    pub fn align_start(
        &self,
        states: &mut [ChainState],
        mut trace: Option<&mut Vec<StepRecord>>,
    ) -> Result<()> {
        let t = self.cfg.horizon();
        for j in 0..self.cfg.m {
            self.langevin(states, t, self.cfg.align(), Phase::Align, j, &mut trace)?;
        }
        Ok(())
    }

    fn predict(
        s: &NoiseSchedule,
        x: &Array2<f64>,
        score: &Array2<f64>,
        eps: &Array2<f64>,
        i: usize,
    ) -> Result<Array2<f64>> {
        let n = s.num_steps as f64;
        let t = i as f64 / n;
        match s.kind {
            SdeKind::Vp => predictor_step_vp(x, score, s.discrete_beta(t)?, eps),
            SdeKind::Ve => {
                let var_t = s.kernel_params(t)?.var;
                let var_prev = if i == 0 {
                    0.0
                } else {
                    s.kernel_params((i - 1) as f64 / n)?.var
                };
                predictor_step_ve(x, score, var_t, var_prev, eps)
            }
        }
    }

    /// The reverse loop `i = N − 1, …, 0`.
    pub fn reverse(
        &self,
        states: &mut [ChainState],
        mut trace: Option<&mut Vec<StepRecord>>,
    ) -> Result<()> {
        let n = self.cfg.n_steps;
        let mut attack_rngs: Vec<SeededRng> = match self.attack {
            Some(_) => (0..states.len())
                .map(|k| rng::stream(rng::derive_seed(self.cfg.seed, ATTACK_STREAM), k as u64))
                .collect(),
            None => Vec::new(),
        };
        for i in (0..n).rev() {
            let t = i as f64 / n as f64;
            let mut scores = self.scores(states, t, self.cfg.in_loop())?;
            if self.attack == Some(i) {
                for ((gx, ga), (s, r)) in scores
                    .iter_mut()
                    .zip(states.iter().zip(attack_rngs.iter_mut()))
                {
                    let (zx, za) = draw_noise(r, &s.chain.mask, gx.ncols());
                    *gx += &zx;
                    *ga += &za;
                }
            }
            for (s, (gx, ga)) in states.iter_mut().zip(&scores) {
                let (ex, ea) = draw_noise(&mut s.rng, &s.chain.mask, s.chain.x.ncols());
                s.chain.x = Self::predict(&self.schedule_x, &s.chain.x, gx, &ex, i)?;
                s.chain.a = Self::predict(&self.schedule_a, &s.chain.a, ga, &ea, i)?;
            }
            if let Some(tr) = trace.as_deref_mut() {
                let (sn_x, sn_a) = mean_norms(&scores);
                tr.push(StepRecord {
                    phase: Phase::Predictor,
                    index: i,
                    t,
                    score_norm_x: sn_x,
                    score_norm_a: sn_a,
                    eta: None,
                });
            }
            Self::check(states, Phase::Predictor, i)?;
            if self.cfg.corrector && self.cfg.gate.admits(t, self.cfg.t_c) {
                self.langevin(
                    states,
                    t,
                    self.cfg.in_loop(),
                    Phase::Corrector,
                    i,
                    &mut trace,
                )?;
            }
        }
        Ok(())
    }

    /// Alignment followed by the reverse loop.
    pub fn run(
        &self,
        mut states: Vec<ChainState>,
        mut trace: Option<&mut Vec<StepRecord>>,
    ) -> Result<Vec<Chain>> {
        self.align_start(&mut states, trace.as_deref_mut())?;
        self.reverse(&mut states, trace)?;
        Ok(states.into_iter().map(|s| s.chain).collect())
    }
}

/// Samples one real-valued chain per mask.
pub fn sample(
    model: &dyn ScoreFn,
    pseudo: Option<&dyn ScoreFn>,
    cfg: &SamplerConfig,
    schedule_x: &NoiseSchedule,
    schedule_a: &NoiseSchedule,
    masks: &[Vec<bool>],
    feature_dim: usize,
) -> Result<Vec<Chain>> {
    let s = Sampler::new(model, pseudo, *cfg, schedule_x, schedule_a)?;
    s.run(s.init(masks, feature_dim), None)
}

/// Padded size, feature width and empirical node-count distribution of generated graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphShape {
    pub v_max: usize,
    pub feature_dim: usize,
    pub node_counts: Vec<usize>,
}

impl GraphShape {
    pub fn from_dataset(d: &Dataset) -> Self {
        GraphShape {
            v_max: d.v_max,
            feature_dim: d.feature_dim,
            node_counts: d.node_counts(),
        }
    }

    /// Node masks for `count` graphs, sizes drawn from the empirical distribution.
    pub fn masks(&self, count: usize, seed: u64) -> Result<Vec<Vec<bool>>> {
        if self.node_counts.is_empty() {
            return Err(Error::InvalidArgument("no node counts to draw from".into()));
        }
        if let Some(&v) = self.node_counts.iter().find(|&&v| v > self.v_max) {
            return Err(Error::InvalidArgument(format!(
                "node count {v} exceeds v_max {}",
                self.v_max
            )));
        }
        let mut r = rng::stream(rng::derive_seed(seed, NODE_COUNT_STREAM), 0);
        Ok((0..count)
            .map(|_| {
                let v = self.node_counts[r.random_range(0..self.node_counts.len())];
                (0..self.v_max).map(|i| i < v).collect()
            })
            .collect())
    }
}

/// Turns a sampled chain into a binary graph with degree features.
pub fn chain_to_graph(chain: &Chain, feature_dim: usize) -> Result<Graph> {
    let a = quantize(&chain.a, &chain.mask, DEFAULT_QUANTIZE_THRESHOLD);
    let x = crate::graphs::degree_features(&a, &chain.mask, feature_dim);
    Graph::new(x, a, chain.mask.clone())
}

/// Samples `count` graphs and packs them, quantized, into a dataset.
pub fn generate_graphs(
    model: &dyn ScoreFn,
    pseudo: Option<&dyn ScoreFn>,
    cfg: &SamplerConfig,
    schedule_x: &NoiseSchedule,
    schedule_a: &NoiseSchedule,
    shape: &GraphShape,
    count: usize,
) -> Result<Dataset> {
    let masks = shape.masks(count, cfg.seed)?;
    let chains = sample(
        model,
        pseudo,
        cfg,
        schedule_x,
        schedule_a,
        &masks,
        shape.feature_dim,
    )?;
    let graphs = chains
        .iter()
        .map(|c| chain_to_graph(c, shape.feature_dim))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        graphs,
        shape.v_max,
        shape.feature_dim,
        format!(
            "sampled: N = {}, M = {}, lambda1 = {}, omega1 = {}, lambda2 = {}, omega2 = {}, corrector = {}, t_c = {}, seed = {}",
            cfg.n_steps, cfg.m, cfg.lambda1, cfg.omega1, cfg.lambda2, cfg.omega2, cfg.corrector, cfg.t_c, cfg.seed
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{GaussianData, OracleScore};
    use ndarray::arr1;

    fn vp() -> NoiseSchedule {
        NoiseSchedule::vp(0.1, 1.0, 1000).unwrap()
    }

    fn oracle(mu: f64, var: f64) -> OracleScore {
        let g = GaussianData::scalar(mu, var).unwrap();
        OracleScore::new(g.clone(), g, vp(), vp())
    }

    #[test]
    fn step_functions_match_hand_arithmetic() {
        let x = arr1(&[0.0]);
        assert_eq!(
            langevin_step(&x, &arr1(&[2.0]), 1.0, &arr1(&[0.0])).unwrap(),
            arr1(&[1.0])
        );
        let y = arr1(&[1.3, -2.0]);
        let z = arr1(&[0.0, 0.0]);
        assert_eq!(langevin_step(&y, &z, 0.7, &z).unwrap(), y);
        assert!(langevin_step(&y, &z, 0.0, &z).is_err());

        let p = predictor_step_vp(&arr1(&[1.0]), &arr1(&[-1.0]), 0.5, &arr1(&[0.0])).unwrap();
        assert!((p[0] - 0.792_893_218_813_452_5).abs() < 1e-12);
        let q = predictor_step_vp(&arr1(&[2.0]), &arr1(&[0.0]), 0.5, &arr1(&[0.0])).unwrap();
        assert!((q[0] - 2.0 * (2.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert_eq!(
            predictor_step_vp(&y, &arr1(&[5.0, 5.0]), 0.0, &z).unwrap(),
            y
        );
        assert!(predictor_step_vp(&y, &z, 1.0, &z).is_err());

        // 1 + 0.75·(−2) + √0.75·0.5
        let v = predictor_step_ve(&arr1(&[1.0]), &arr1(&[-2.0]), 1.0, 0.25, &arr1(&[0.5])).unwrap();
        assert!((v[0] - (1.0 - 1.5 + 0.75f64.sqrt() * 0.5)).abs() < 1e-12);
        assert_eq!(
            predictor_step_ve(&y, &arr1(&[3.0, 3.0]), 0.5, 0.5, &z).unwrap(),
            y
        );
        assert!(predictor_step_ve(&y, &z, 0.2, 0.5, &z).is_err());
    }

    #[test]
    fn eta_rule() {
        assert!((langevin_eta(3.0, 3.0, 0.16) - 0.0512).abs() < 1e-15);
        let base = langevin_eta(1.5, 2.0, 0.16);
        assert!((langevin_eta(3.0, 2.0, 0.16) - base / 4.0).abs() < 1e-15);
        assert_eq!(langevin_eta(0.0, 1.0, 0.16), ETA_MIN);
        assert_eq!(langevin_eta(1e300, 1.0, 0.16), ETA_MIN);
        assert_eq!(langevin_eta(1e-300, 1.0, 0.16), ETA_MAX);
    }

    #[test]
    fn langevin_small_eta_reaches_target_variance() {
        // exact score −x of N(0, 1), long run at η = 0.01
        let mut r = rng::rng_from_seed(2);
        let chains = 2000;
        let mut x = Array::from_shape_fn(chains, |_| rng::normal(&mut r));
        for _ in 0..1000 {
            let s = x.mapv(|v| -v);
            let e = Array::from_shape_fn(chains, |_| rng::normal(&mut r));
            x = langevin_step(&x, &s, 0.01, &e).unwrap();
        }
        let var = x.mapv(|v| v * v).mean().unwrap();
        assert!((0.9..=1.1).contains(&var), "{var}");
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::oc(1000, 0).validate().is_ok());
        assert!(SamplerConfig {
            omega1: 0.0,
            ..SamplerConfig::oc(10, 0)
        }
        .validate()
        .is_err());
        assert!(SamplerConfig {
            t_c: 1.5,
            ..SamplerConfig::oc(10, 0)
        }
        .validate()
        .is_err());
        assert!(SamplerConfig {
            lambda2: -1.0,
            ..SamplerConfig::oc(10, 0)
        }
        .validate()
        .is_err());
        assert!(SamplerConfig::oc(1, 0).validate().is_err());
        let o = oracle(0.0, 1.0);
        let needs = SamplerConfig {
            lambda1: 0.2,
            ..SamplerConfig::oc(10, 0)
        };
        assert!(Sampler::new(&o, None, needs, &vp(), &vp()).is_err());
        assert!(Sampler::new(&o, Some(&o), needs, &vp(), &vp()).is_ok());
    }

    #[test]
    fn two_step_smoke() {
        let o = oracle(0.5, 1.0);
        let masks = vec![vec![true, true, false]; 3];
        let out = sample(&o, None, &SamplerConfig::oc(2, 1), &vp(), &vp(), &masks, 2).unwrap();
        assert_eq!(out.len(), 3);
        for c in &out {
            assert_eq!(c.x.dim(), (3, 2));
            assert_eq!(c.a.dim(), (3, 3));
            assert!(c.is_finite());
            assert!(c.x.row(2).iter().all(|&v| v == 0.0));
            assert_eq!(c.a, c.a.t());
        }
    }

    #[test]
    fn ve_oracle_smoke_is_finite() {
        let s = NoiseSchedule::ve(0.2, 1.0, 1000).unwrap();
        let g = GaussianData::scalar(0.0, 1.0).unwrap();
        let o = OracleScore::new(g.clone(), g, s, s);
        let out = sample(
            &o,
            None,
            &SamplerConfig::wc(10, 3),
            &s,
            &s,
            &[vec![true; 4]],
            1,
        )
        .unwrap();
        assert!(out[0].is_finite());
    }

    #[test]
    fn seed_determinism() {
        let o = oracle(0.3, 0.5);
        let masks = vec![vec![true; 4]; 2];
        let cfg = SamplerConfig {
            m: 5,
            ..SamplerConfig::wc(20, 9)
        };
        let a = sample(&o, None, &cfg, &vp(), &vp(), &masks, 1).unwrap();
        let b = sample(&o, None, &cfg, &vp(), &vp(), &masks, 1).unwrap();
        assert_eq!(a, b);
        let c = sample(
            &o,
            None,
            &SamplerConfig { seed: 10, ..cfg },
            &vp(),
            &vp(),
            &masks,
            1,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corrector_gate_follows_cutoff() {
        let o = oracle(0.0, 1.0);
        let cfg = SamplerConfig {
            t_c: 0.3,
            ..SamplerConfig::wc(20, 0)
        };
        for gate in [CorrectorGate::AtOrBelow, CorrectorGate::Above] {
            let s = Sampler::new(&o, None, SamplerConfig { gate, ..cfg }, &vp(), &vp()).unwrap();
            let mut trace = Vec::new();
            s.run(s.init(&[vec![true; 3]], 1), Some(&mut trace))
                .unwrap();
            let corrected: Vec<f64> = trace
                .iter()
                .filter(|r| r.phase == Phase::Corrector)
                .map(|r| r.t)
                .collect();
            let expect: Vec<f64> = (0..20)
                .rev()
                .map(|i| i as f64 / 20.0)
                .filter(|&t| gate.admits(t, 0.3))
                .collect();
            assert_eq!(corrected, expect);
            assert!(!corrected.is_empty());
        }
    }

    #[test]
    fn attack_changes_only_its_step() {
        let o = oracle(0.0, 1.0);
        let cfg = SamplerConfig::oc(10, 4);
        let plain = Sampler::new(&o, None, cfg, &vp(), &vp()).unwrap();
        let hit = Sampler::new(&o, None, cfg, &vp(), &vp())
            .unwrap()
            .with_attack(0.5)
            .unwrap();
        assert_eq!(hit.attack_step(), Some(5));
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        plain
            .run(plain.init(&[vec![true; 3]], 1), Some(&mut ta))
            .unwrap();
        hit.run(hit.init(&[vec![true; 3]], 1), Some(&mut tb))
            .unwrap();
        for (a, b) in ta.iter().zip(&tb) {
            if a.index > 5 {
                assert_eq!(a, b);
            } else if a.index == 5 {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn node_count_masks_follow_reference() {
        let shape = GraphShape {
            v_max: 6,
            feature_dim: 2,
            node_counts: vec![3, 5],
        };
        let masks = shape.masks(50, 1).unwrap();
        for m in &masks {
            let v = m.iter().filter(|&&b| b).count();
            assert!(v == 3 || v == 5);
            assert!(m[..v].iter().all(|&b| b));
        }
        assert_eq!(masks, shape.masks(50, 1).unwrap());
    }
}
