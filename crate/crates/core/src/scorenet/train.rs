//! Denoising score matching and the training loop.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ops::{Ops, Tape};
use super::{network, ScoreModel};
use crate::error::{Error, Result};
use crate::graphs::{node_mask, pair_mask, Dataset, Graph};
use crate::rng::{self, SeededRng};
use crate::schedule::{NoiseSchedule, DEFAULT_TIME_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `w(t) = var_t`
    Variance,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub step_size: f64,
    pub batch: usize,
    pub iterations: usize,
    pub t_floor: f64,
    pub weight_mode: WeightMode,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            step_size: 5e-3,
            batch: 16,
            iterations: 2000,
            t_floor: DEFAULT_TIME_FLOOR,
            weight_mode: WeightMode::Variance,
            seed: 0,
            grad_clip: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step_size must be > 0, got {}",
                self.step_size
            )));
        }
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch must be > 0".into()));
        }
        if !(self.t_floor > 0.0 && self.t_floor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "t_floor must lie in (0, 1), got {}",
                self.t_floor
            )));
        }
        Ok(())
    }
}

/// Diffusion time and noise for one training graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DsmSample {
    pub t: f64,
    pub eps_x: Array2<f64>,
    pub eps_a: Array2<f64>,
}

impl DsmSample {
    /// `t ~ U[t_floor, 1]`, Gaussian node noise and symmetric edge noise.
    pub fn draw(r: &mut SeededRng, g: &Graph, t_floor: f64) -> Self {
        let t = t_floor + (1.0 - t_floor) * r.random::<f64>();
        let eps_x = rng::normal_matrix(r, g.v_max(), g.feature_dim());
        let eps_a = rng::symmetric_normal(r, g.v_max());
        DsmSample { t, eps_x, eps_a }
    }
}

struct Terms {
    x_t: Array2<f64>,
    a_t: Array2<f64>,
    target_x: Array2<f64>,
    target_a: Array2<f64>,
    w_x: f64,
    w_a: f64,
}

fn weight(s: &NoiseSchedule, t: f64, mode: WeightMode) -> f64 {
    match mode {
        WeightMode::Variance => s.kernel_unchecked(t).var,
        WeightMode::Uniform => 1.0,
    }
}

fn terms(model: &ScoreModel, g: &Graph, sample: &DsmSample, mode: WeightMode) -> Result<Terms> {
    if !(sample.t >= model.time_floor.min(DEFAULT_TIME_FLOOR) && sample.t <= 1.0) {
        return Err(Error::TimeOutOfRange {
            t: sample.t,
            range: "[t_floor, 1]",
        });
    }
    let nm = node_mask(g.mask()).insert_axis(ndarray::Axis(1));
    let pm = pair_mask(g.mask());
    let eps_x = &sample.eps_x * &nm;
    let eps_a = &sample.eps_a * &pm;
    let (sx, sa) = (&model.schedule_x, &model.schedule_a);
    let x_t = sx.perturb(g.x(), sample.t, &eps_x)?;
    let a_t = sa.perturb(g.a(), sample.t, &eps_a)?;
    let target_x = sx.cond_score(&x_t, g.x(), sample.t)?;
    let target_a = sa.cond_score(&a_t, g.a(), sample.t)?;
    Ok(Terms {
        x_t,
        a_t,
        target_x,
        target_a,
        w_x: weight(sx, sample.t, mode),
        w_a: weight(sa, sample.t, mode),
    })
}

fn check_batch(graphs: &[Graph], samples: &[DsmSample]) -> Result<()> {
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if graphs.len() != samples.len() {
        return Err(Error::InvalidArgument(format!(
            "{} graphs but {} noise samples",
            graphs.len(),
            samples.len()
        )));
    }
    Ok(())
}

/// Mean over the batch of `w_X(t)‖S_X − ∇log q_X‖² + w_A(t)‖S_A − ∇log q_A‖²`.
pub fn dsm_loss(
    model: &ScoreModel,
    graphs: &[Graph],
    samples: &[DsmSample],
    mode: WeightMode,
) -> Result<f64> {
    check_batch(graphs, samples)?;
    let mut total = 0.0;
    for (g, s) in graphs.iter().zip(samples) {
        let tm = terms(model, g, s, mode)?;
        let (s_x, s_a) = model.forward(&tm.x_t, &tm.a_t, g.mask(), s.t)?;
        let ex: f64 = s_x
            .iter()
            .zip(tm.target_x.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let ea: f64 = s_a
            .iter()
            .zip(tm.target_a.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        total += tm.w_x * ex + tm.w_a * ea;
    }
    Ok(total / graphs.len() as f64)
}

fn graph_loss_and_grad(
    model: &ScoreModel,
    g: &Graph,
    s: &DsmSample,
    mode: WeightMode,
) -> Result<(f64, [Vec<f64>; 2])> {
    let tm = terms(model, g, s, mode)?;
    let inputs = model.prepare(&tm.x_t, &tm.a_t, g.mask(), s.t)?;
    let mut tape = Tape::new([&model.node, &model.edge]);
    let (s_x, s_a) = network(&mut tape, &model.arch, &inputs);
    let ex = tape.sq_err(&s_x, &tm.target_x);
    let ea = tape.sq_err(&s_a, &tm.target_a);
    let ex = tape.scale(&ex, tm.w_x);
    let ea = tape.scale(&ea, tm.w_a);
    let loss = tape.add(&ex, &ea);
    let value = tape.value(loss)[[0, 0]];
    let mut grads = [vec![0.0; model.node.len()], vec![0.0; model.edge.len()]];
    tape.backward(loss, &mut grads);
    Ok((value, grads))
}

/// Loss and its gradient with respect to the node and edge parameters.
pub fn dsm_loss_and_grad(
    model: &ScoreModel,
    graphs: &[Graph],
    samples: &[DsmSample],
    mode: WeightMode,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_batch(graphs, samples)?;
    let parts = graphs
        .par_iter()
        .zip(samples.par_iter())
        .map(|(g, s)| graph_loss_and_grad(model, g, s, mode))
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / graphs.len() as f64;
    let mut loss = 0.0;
    let mut gn = vec![0.0; model.node.len()];
    let mut ge = vec![0.0; model.edge.len()];
    // fixed reduction order keeps runs bitwise reproducible
    for (l, [a, b]) in parts {
        loss += l;
        gn.iter_mut().zip(&a).for_each(|(d, s)| *d += s);
        ge.iter_mut().zip(&b).for_each(|(d, s)| *d += s);
    }
    gn.iter_mut().chain(ge.iter_mut()).for_each(|v| *v *= scale);
    Ok((loss * scale, gn, ge))
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.step += 1;
        let b1t = 1.0 - self.beta1.powf(self.step as f64);
        let b2t = 1.0 - self.beta2.powf(self.step as f64);
        let mut k = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (pi, &gi) in p.iter_mut().zip(g.iter()) {
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gi;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gi * gi;
                let mh = self.m[k] / b1t;
                let vh = self.v[k] / b2t;
                *pi -= self.lr * mh / (vh.sqrt() + self.eps);
                k += 1;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ScoreModel,
    pub losses: Vec<f64>,
    pub optimizer: Adam,
}

/// Resumable DSM training loop. Iteration `k` draws its batch and noise from
/// `rng::stream(seed, k)`, so resuming at `k` continues the same trajectory.
pub struct Trainer {
    pub model: ScoreModel,
    pub cfg: TrainConfig,
    pub optimizer: Adam,
    pub iteration: usize,
    pub losses: Vec<f64>,
}

impl Trainer {
    pub fn new(model: ScoreModel, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let n = model.param_count();
        Ok(Trainer {
            optimizer: Adam::new(cfg.step_size, n),
            model,
            cfg,
            iteration: 0,
            losses: Vec::new(),
        })
    }

    pub fn resume(
        model: ScoreModel,
        cfg: TrainConfig,
        optimizer: Adam,
        iteration: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if optimizer.m.len() != model.param_count() {
            return Err(Error::InvalidArgument(
                "optimizer state does not match model size".into(),
            ));
        }
        Ok(Trainer {
            model,
            cfg,
            optimizer,
            iteration,
            losses: Vec::new(),
        })
    }

    pub fn step(&mut self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("training data is empty".into()));
        }
        self.model.time_floor = self.cfg.t_floor;
        let mut r = rng::stream(self.cfg.seed, self.iteration as u64);
        let mut graphs = Vec::with_capacity(self.cfg.batch);
        let mut samples = Vec::with_capacity(self.cfg.batch);
        for _ in 0..self.cfg.batch {
            let g = &data.graphs[r.random_range(0..data.len())];
            samples.push(DsmSample::draw(&mut r, g, self.cfg.t_floor));
            graphs.push(g.clone());
        }
        let (loss, mut gn, mut ge) =
            dsm_loss_and_grad(&self.model, &graphs, &samples, self.cfg.weight_mode)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: self.iteration,
                loss,
            });
        }
        if let Some(clip) = self.cfg.grad_clip {
            let norm = gn.iter().chain(&ge).map(|g| g * g).sum::<f64>().sqrt();
            if norm > clip {
                let s = clip / norm;
                gn.iter_mut().chain(ge.iter_mut()).for_each(|g| *g *= s);
            }
        }
        let ScoreModel { node, edge, .. } = &mut self.model;
        self.optimizer
            .update(&mut [node.values_mut(), edge.values_mut()], &[&gn, &ge]);
        if !self.model.node.all_finite() || !self.model.edge.all_finite() {
            return Err(Error::Diverged {
                iteration: self.iteration,
                loss: f64::NAN,
            });
        }
        self.iteration += 1;
        self.losses.push(loss);
        Ok(loss)
    }

    /// Runs until `self.iteration == until`.
    pub fn run_until(&mut self, data: &Dataset, until: usize) -> Result<()> {
        while self.iteration < until {
            self.step(data)?;
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            model: self.model,
            losses: self.losses,
            optimizer: self.optimizer,
        }
    }
}

pub fn train(model: ScoreModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(model, *cfg)?;
    trainer.run_until(data, cfg.iterations)?;
    Ok(trainer.finish())
}
