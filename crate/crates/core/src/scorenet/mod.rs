//! Permutation-equivariant score networks for node features and adjacency.
//!
//! Two independent message-passing networks share the same trunk design:
//! the node network (parameters θ) predicts `S_X` and the edge network
//! (parameters φ) predicts `S_A`. Each trunk layer computes
//!
//! ```text
//! H ← tanh(H W₁ + Ã H W₂ + 1 (e(t) W_t + b)ᵀ) ⊙ mask
//! ```
//!
//! with `Ã` the masked noisy adjacency scaled by `1/√V` and `e(t)` a
//! sinusoidal time embedding. The node head is linear in `[H, X]`; the edge
//! head builds each pair from the symmetric terms `p_i + p_j`, `q_i q_j` and
//! the entry `A_ij` itself, so `S_A` is symmetric by construction.
//!
//! Both heads predict a noise-scale quantity that is divided by the kernel
//! standard deviation `σ(max(t, t_floor))` of their own channel.

mod checkpoint;
mod ops;
mod params;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, OptimizerState};
pub use params::{BlockSpec, ParamSet};
pub use train::{
    dsm_loss, dsm_loss_and_grad, train, Adam, DsmSample, TrainConfig, TrainOutcome, Trainer,
    WeightMode,
};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{node_mask, pair_mask};
use crate::schedule::{NoiseSchedule, DEFAULT_TIME_FLOOR};
use ops::{Eager, Ops};

pub(crate) const NODE_NET: usize = 0;
pub(crate) const EDGE_NET: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub time_embed_dim: usize,
    pub edge_channels: usize,
}

impl Arch {
    pub fn new(feature_dim: usize) -> Self {
        Arch {
            feature_dim,
            hidden_dim: 32,
            num_layers: 2,
            time_embed_dim: 8,
            edge_channels: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0
            || self.hidden_dim == 0
            || self.num_layers == 0
            || self.edge_channels == 0
        {
            return Err(Error::InvalidArgument(format!(
                "degenerate architecture {self:?}"
            )));
        }
        if self.time_embed_dim == 0 || !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(
                "time_embed_dim must be a positive even number".into(),
            ));
        }
        Ok(())
    }

    fn trunk_layout(&self, prefix: &str) -> Vec<BlockSpec> {
        let mut out = Vec::new();
        let h = self.hidden_dim;
        for l in 0..self.num_layers {
            let d_in = if l == 0 { self.feature_dim } else { h };
            out.push(BlockSpec::new(format!("{prefix}.layer{l}.w_self"), d_in, h));
            out.push(BlockSpec::new(format!("{prefix}.layer{l}.w_nbr"), d_in, h));
            out.push(BlockSpec::new(
                format!("{prefix}.layer{l}.w_time"),
                self.time_embed_dim,
                h,
            ));
            out.push(BlockSpec::new(format!("{prefix}.layer{l}.bias"), 1, h));
        }
        out
    }

    pub fn node_layout(&self) -> Vec<BlockSpec> {
        let (h, f) = (self.hidden_dim, self.feature_dim);
        let mut out = self.trunk_layout("node");
        out.push(BlockSpec::new("node.head.w_hidden", h, f));
        out.push(BlockSpec::new("node.head.w_skip", f, f));
        out.push(BlockSpec::new("node.head.bias", 1, f));
        out
    }

    pub fn edge_layout(&self) -> Vec<BlockSpec> {
        let (h, k, e) = (self.hidden_dim, self.edge_channels, self.time_embed_dim);
        let mut out = self.trunk_layout("edge");
        out.push(BlockSpec::new("edge.head.w_sum", h, k));
        out.push(BlockSpec::new("edge.head.w_sum_time", e, k));
        out.push(BlockSpec::new("edge.head.bias_sum", 1, k));
        out.push(BlockSpec::new("edge.head.w_prod", h, k));
        out.push(BlockSpec::new("edge.head.w_entry", 1, k));
        out.push(BlockSpec::new("edge.head.w_out", 1, k));
        out.push(BlockSpec::new("edge.head.bias_out", 1, 1));
        out.push(BlockSpec::new("edge.head.w_skip", 1, 1));
        out.push(BlockSpec::new("edge.head.w_common", 1, k));
        out
    }

    fn trunk_param_count(&self) -> usize {
        let h = self.hidden_dim;
        (0..self.num_layers)
            .map(|l| {
                let d_in = if l == 0 { self.feature_dim } else { h };
                2 * d_in * h + self.time_embed_dim * h + h
            })
            .sum()
    }

    pub fn node_param_count(&self) -> usize {
        let (h, f) = (self.hidden_dim, self.feature_dim);
        self.trunk_param_count() + h * f + f * f + f
    }

    pub fn edge_param_count(&self) -> usize {
        let (h, k, e) = (self.hidden_dim, self.edge_channels, self.time_embed_dim);
        self.trunk_param_count() + 2 * h * k + e * k + 4 * k + 2
    }
}

/// Final-layer blocks that start at zero, so an untrained model outputs zero.
const ZERO_INIT: &[&str] = &["head.w_hidden", "head.w_skip", "head.w_out"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    Pretrained,
    Pseudo,
}

/// Score model: node network θ, edge network φ and the schedules it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    pub arch: Arch,
    pub node: ParamSet,
    pub edge: ParamSet,
    pub schedule_x: NoiseSchedule,
    pub schedule_a: NoiseSchedule,
    pub time_floor: f64,
    pub role: ModelRole,
}

/// Anything that maps a noisy graph state at time `t` to `(S_X, S_A)`.
pub trait ScoreFn: Sync {
    fn score(
        &self,
        x: &Array2<f64>,
        a: &Array2<f64>,
        mask: &[bool],
        t: f64,
    ) -> Result<(Array2<f64>, Array2<f64>)>;
}

pub(crate) struct Inputs {
    pub x: Array2<f64>,
    pub a: Array2<f64>,
    pub a_scaled: Array2<f64>,
    /// Common-neighbour weights `Ã²`, masked.
    pub common: Array2<f64>,
    pub node_mask: Array1<f64>,
    pub pair_mask: Array2<f64>,
    pub time_embed: Array2<f64>,
    pub inv_sd_x: f64,
    pub inv_sd_a: f64,
}

pub fn time_embedding(t: f64, dim: usize) -> Array2<f64> {
    let half = dim / 2;
    let mut e = Array2::zeros((1, dim));
    for k in 0..half {
        let w = std::f64::consts::PI * (1u64 << k) as f64;
        e[[0, k]] = (w * t).sin();
        e[[0, half + k]] = (w * t).cos();
    }
    e
}

impl ScoreModel {
    /// Freshly initialized model (zero output heads).
    pub fn new(
        arch: Arch,
        schedule_x: NoiseSchedule,
        schedule_a: NoiseSchedule,
        seed: u64,
    ) -> Result<Self> {
        arch.validate()?;
        schedule_x.validate()?;
        schedule_a.validate()?;
        let mut node = ParamSet::zeros(arch.node_layout());
        let mut edge = ParamSet::zeros(arch.edge_layout());
        node.init(crate::rng::derive_seed(seed, 0), ZERO_INIT);
        edge.init(crate::rng::derive_seed(seed, 1), ZERO_INIT);
        Ok(ScoreModel {
            arch,
            node,
            edge,
            schedule_x,
            schedule_a,
            time_floor: DEFAULT_TIME_FLOOR,
            role: ModelRole::Pretrained,
        })
    }

    pub fn param_count(&self) -> usize {
        self.node.len() + self.edge.len()
    }

    pub(crate) fn prepare(
        &self,
        x: &Array2<f64>,
        a: &Array2<f64>,
        mask: &[bool],
        t: f64,
    ) -> Result<Inputs> {
        let n = mask.len();
        if x.dim() != (n, self.arch.feature_dim) {
            return Err(Error::ShapeMismatch {
                left: x.shape().to_vec(),
                right: vec![n, self.arch.feature_dim],
            });
        }
        if a.dim() != (n, n) {
            return Err(Error::ShapeMismatch {
                left: a.shape().to_vec(),
                right: vec![n, n],
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange { t, range: "[0, 1]" });
        }
        if !self.node.all_finite() || !self.edge.all_finite() {
            return Err(Error::NonFinite {
                what: "score model parameters".into(),
            });
        }
        let node_mask = node_mask(mask);
        let pair_mask = pair_mask(mask);
        let v = mask.iter().filter(|&&m| m).count().max(1) as f64;
        let a_masked = a * &pair_mask;
        let t_eff = t.max(self.time_floor);
        let sd_x = self.schedule_x.kernel_unchecked(t_eff).var.sqrt();
        let sd_a = self.schedule_a.kernel_unchecked(t_eff).var.sqrt();
        let a_scaled = &a_masked / v.sqrt();
        let common = a_scaled.dot(&a_scaled) * &pair_mask;
        Ok(Inputs {
            x: x * &node_mask.view().insert_axis(ndarray::Axis(1)),
            a_scaled,
            common,
            a: a_masked,
            node_mask,
            pair_mask,
            time_embed: time_embedding(t, self.arch.time_embed_dim),
            inv_sd_x: 1.0 / sd_x,
            inv_sd_a: 1.0 / sd_a,
        })
    }

    pub fn forward(
        &self,
        x: &Array2<f64>,
        a: &Array2<f64>,
        mask: &[bool],
        t: f64,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let inputs = self.prepare(x, a, mask, t)?;
        let mut ops = Eager {
            nets: [&self.node, &self.edge],
        };
        Ok(network(&mut ops, &self.arch, &inputs))
    }
}

impl ScoreFn for ScoreModel {
    fn score(
        &self,
        x: &Array2<f64>,
        a: &Array2<f64>,
        mask: &[bool],
        t: f64,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        self.forward(x, a, mask, t)
    }
}

fn trunk<O: Ops>(
    o: &mut O,
    arch: &Arch,
    net: usize,
    inputs: &Inputs,
    x: &O::T,
    a_scaled: &O::T,
    temb: &O::T,
) -> O::T {
    let mut h = x.clone();
    for l in 0..arch.num_layers {
        let base = 4 * l;
        let w_self = o.param(net, base);
        let w_nbr = o.param(net, base + 1);
        let w_time = o.param(net, base + 2);
        let bias = o.param(net, base + 3);
        let own = o.matmul(&h, &w_self);
        let agg = o.matmul(a_scaled, &h);
        let nbr = o.matmul(&agg, &w_nbr);
        let tt = o.matmul(temb, &w_time);
        let row = o.add(&tt, &bias);
        let pre = o.add(&own, &nbr);
        let pre = o.add_row(&pre, &row);
        let act = o.tanh(&pre);
        h = o.mask_rows(&act, &inputs.node_mask);
    }
    h
}

/// Network body shared by eager evaluation and the gradient tape.
pub(crate) fn network<O: Ops>(o: &mut O, arch: &Arch, inputs: &Inputs) -> (O::T, O::T) {
    let x = o.constant(inputs.x.clone());
    let a = o.constant(inputs.a.clone());
    let a_scaled = o.constant(inputs.a_scaled.clone());
    let temb = o.constant(inputs.time_embed.clone());
    let head = 4 * arch.num_layers;

    // node head
    let h = trunk(o, arch, NODE_NET, inputs, &x, &a_scaled, &temb);
    let w_hidden = o.param(NODE_NET, head);
    let w_skip = o.param(NODE_NET, head + 1);
    let bias = o.param(NODE_NET, head + 2);
    let out = o.matmul(&h, &w_hidden);
    let skip = o.matmul(&x, &w_skip);
    let out = o.add(&out, &skip);
    let out = o.add_row(&out, &bias);
    let out = o.mask_rows(&out, &inputs.node_mask);
    let s_x = o.scale(&out, inputs.inv_sd_x);

    // edge head
    let h = trunk(o, arch, EDGE_NET, inputs, &x, &a_scaled, &temb);
    let w_sum = o.param(EDGE_NET, head);
    let w_sum_time = o.param(EDGE_NET, head + 1);
    let bias_sum = o.param(EDGE_NET, head + 2);
    let w_prod = o.param(EDGE_NET, head + 3);
    let w_entry = o.param(EDGE_NET, head + 4);
    let w_out = o.param(EDGE_NET, head + 5);
    let bias_out = o.param(EDGE_NET, head + 6);
    let w_skip = o.param(EDGE_NET, head + 7);
    let w_common = o.param(EDGE_NET, head + 8);
    let common = o.constant(inputs.common.clone());
    let p = o.matmul(&h, &w_sum);
    let pt = o.matmul(&temb, &w_sum_time);
    let pt = o.add(&pt, &bias_sum);
    let p = o.add_row(&p, &pt);
    let q = o.matmul(&h, &w_prod);
    let mut acc = o.scale_by(&a, &w_skip, 0);
    acc = o.shift_by(&acc, &bias_out, 0);
    for c in 0..arch.edge_channels {
        let pc = o.column(&p, c);
        let qc = o.column(&q, c);
        let z = o.outer_sum(&pc);
        let zq = o.outer_self(&qc);
        let z = o.add(&z, &zq);
        let za = o.scale_by(&a, &w_entry, c);
        let z = o.add(&z, &za);
        let zc = o.scale_by(&common, &w_common, c);
        let z = o.add(&z, &zc);
        let g = o.tanh(&z);
        let g = o.scale_by(&g, &w_out, c);
        acc = o.add(&acc, &g);
    }
    let s_a = o.mask_full(&acc, &inputs.pair_mask);
    let s_a = o.scale(&s_a, inputs.inv_sd_a);
    (s_x, s_a)
}
