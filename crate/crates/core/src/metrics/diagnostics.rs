//! Score-norm profiles and the score-perturbation experiment.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, MmdReport};
use crate::error::{Error, Result};
use crate::graphs::{node_mask, pair_mask, Dataset};
use crate::rng;
use crate::sampler::{chain_to_graph, Chain, GraphShape, Phase, Sampler, SamplerConfig};
use crate::schedule::NoiseSchedule;
use crate::scorenet::ScoreFn;

const FORWARD_STREAM: u64 = 0xF0F0;
const START_STREAM: u64 = 0x57A7;

/// Mean score norm along the reverse time grid, under forward-perturbed data
/// and under the sampler's own states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTrace {
    pub times: Vec<f64>,
    pub forward_norms: Vec<f64>,
    pub reverse_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTraces {
    pub node: ScoreTrace,
    pub edge: ScoreTrace,
}

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Forward-perturbs graph `k` of `data` to time `t` with noise from `r`.
fn perturb_graph(
    data: &Dataset,
    k: usize,
    t: f64,
    sx: &NoiseSchedule,
    sa: &NoiseSchedule,
    r: &mut rng::SeededRng,
) -> Result<Chain> {
    let g = &data.graphs[k];
    let nm = node_mask(g.mask()).insert_axis(ndarray::Axis(1));
    let ex = rng::normal_matrix(r, g.v_max(), g.feature_dim()) * &nm;
    let ea = rng::symmetric_normal(r, g.v_max()) * &pair_mask(g.mask());
    Ok(Chain {
        x: sx.perturb(g.x(), t, &ex)?,
        a: sa.perturb(g.a(), t, &ea)?,
        mask: g.mask().to_vec(),
    })
}

/// Forward branch: perturb every graph of `data` at each grid time and average
/// `‖s‖₂` of the model. Reverse branch: run the sampler on chains shaped like
/// `data` and average `‖s‖₂` at each predictor step. Grid: `i / N`, `i = N − 1, …, 0`.
pub fn score_norm_trace(
    model: &dyn ScoreFn,
    pseudo: Option<&dyn ScoreFn>,
    data: &Dataset,
    cfg: &SamplerConfig,
    schedule_x: &NoiseSchedule,
    schedule_a: &NoiseSchedule,
) -> Result<ScoreTraces> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("score trace needs data".into()));
    }
    let sampler = Sampler::new(model, pseudo, *cfg, schedule_x, schedule_a)?;
    let n = cfg.n_steps;
    let times: Vec<f64> = (0..n).rev().map(|i| i as f64 / n as f64).collect();
    let count = data.len() as f64;

    let mut fwd_x = Vec::with_capacity(n);
    let mut fwd_a = Vec::with_capacity(n);
    for (step, &t) in times.iter().enumerate() {
        let norms: Vec<(f64, f64)> = (0..data.len())
            .into_par_iter()
            .map(|k| {
                let mut r = rng::stream(
                    rng::derive_seed(cfg.seed, FORWARD_STREAM),
                    (step * data.len() + k) as u64,
                );
                let c = perturb_graph(data, k, t, schedule_x, schedule_a, &mut r)?;
                let (sx, sa) = model.score(&c.x, &c.a, &c.mask, t)?;
                Ok((frob(&sx), frob(&sa)))
            })
            .collect::<Result<_>>()?;
        fwd_x.push(norms.iter().map(|p| p.0).sum::<f64>() / count);
        fwd_a.push(norms.iter().map(|p| p.1).sum::<f64>() / count);
    }

    let masks: Vec<Vec<bool>> = data.graphs.iter().map(|g| g.mask().to_vec()).collect();
    let mut trace = Vec::new();
    sampler.run(sampler.init(&masks, data.feature_dim), Some(&mut trace))?;
    let pred: Vec<_> = trace
        .iter()
        .filter(|r| r.phase == Phase::Predictor)
        .collect();
    Ok(ScoreTraces {
        node: ScoreTrace {
            times: times.clone(),
            forward_norms: fwd_x,
            reverse_norms: pred.iter().map(|r| r.score_norm_x).collect(),
        },
        edge: ScoreTrace {
            times,
            forward_norms: fwd_a,
            reverse_norms: pred.iter().map(|r| r.score_norm_a).collect(),
        },
    })
}

/// Samples `reference.len()` graphs, optionally perturbing the score with
/// `z ~ N(0, I)` at the single step nearest `t_attack`, and evaluates them
/// against `reference`.
///
/// With `start` set, chain `k` begins from graph `k mod |start|` forward-perturbed
/// to the horizon instead of from `N(0, I)`.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_experiment(
    model: &dyn ScoreFn,
    pseudo: Option<&dyn ScoreFn>,
    cfg: &SamplerConfig,
    schedule_x: &NoiseSchedule,
    schedule_a: &NoiseSchedule,
    t_attack: Option<f64>,
    reference: &Dataset,
    start: Option<&Dataset>,
) -> Result<MmdReport> {
    let mut sampler = Sampler::new(model, pseudo, *cfg, schedule_x, schedule_a)?;
    if let Some(t) = t_attack {
        sampler = sampler.with_attack(t)?;
    }
    let count = reference.len();
    let states = match start {
        None => {
            let masks = GraphShape::from_dataset(reference).masks(count, cfg.seed)?;
            sampler.init(&masks, reference.feature_dim)
        }
        Some(d) if d.is_empty() => {
            return Err(Error::InvalidArgument("empty start dataset".into()))
        }
        Some(d) => {
            let t = cfg.horizon();
            let chains = (0..count)
                .map(|k| {
                    let mut r = rng::stream(rng::derive_seed(cfg.seed, START_STREAM), k as u64);
                    perturb_graph(d, k % d.len(), t, schedule_x, schedule_a, &mut r)
                })
                .collect::<Result<Vec<_>>>()?;
            sampler.start_from(chains)
        }
    };
    let chains = sampler.run(states, None)?;
    let graphs = chains
        .iter()
        .map(|c| chain_to_graph(c, reference.feature_dim))
        .collect::<Result<Vec<_>>>()?;
    let gen = Dataset::new(
        graphs,
        reference.v_max,
        reference.feature_dim,
        "perturbation experiment",
    )?;
    evaluate(&gen, reference)
}

/// `perturbation_experiment` at each attack time.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_sweep(
    model: &dyn ScoreFn,
    pseudo: Option<&dyn ScoreFn>,
    cfg: &SamplerConfig,
    schedule_x: &NoiseSchedule,
    schedule_a: &NoiseSchedule,
    times: &[f64],
    reference: &Dataset,
    start: Option<&Dataset>,
) -> Result<Vec<(f64, MmdReport)>> {
    times
        .iter()
        .map(|&t| {
            let r = perturbation_experiment(
                model,
                pseudo,
                cfg,
                schedule_x,
                schedule_a,
                Some(t),
                reference,
                start,
            )?;
            Ok((t, r))
        })
        .collect()
}
