//! Checkpoint files.
//!
//! Layout: a magic line, one JSON header line, then raw little-endian `f64`
//! blocks in the order node parameters, edge parameters and, when the header
//! has an `optimizer` entry, the Adam first and second moments.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::Adam;
use super::{Arch, ModelRole, ParamSet, ScoreModel};
use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;

const MAGIC: &str = "SCOREGRAPH-CHECKPOINT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ScoreModel,
    /// Adam state for resuming; `None` for inference-only checkpoints.
    pub optimizer: Option<Adam>,
    pub iteration: usize,
    pub provenance: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    role: ModelRole,
    arch: Arch,
    schedule_x: NoiseSchedule,
    schedule_a: NoiseSchedule,
    time_floor: f64,
    node_count: usize,
    edge_count: usize,
    iteration: usize,
    optimizer: Option<OptimizerState>,
    provenance: String,
}

fn err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let m = &ck.model;
    let header = Header {
        version: VERSION,
        role: m.role,
        arch: m.arch,
        schedule_x: m.schedule_x,
        schedule_a: m.schedule_a,
        time_floor: m.time_floor,
        node_count: m.node.len(),
        edge_count: m.edge.len(),
        iteration: ck.iteration,
        optimizer: ck.optimizer.as_ref().map(|o| OptimizerState {
            step: o.step,
            lr: o.lr,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
        }),
        provenance: ck.provenance.clone(),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{MAGIC}")?;
    writeln!(
        out,
        "{}",
        serde_json::to_string(&header).map_err(std::io::Error::other)?
    )?;
    let mut write_block = |vals: &[f64]| -> std::io::Result<()> {
        for v in vals {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    write_block(m.node.values())?;
    write_block(m.edge.values())?;
    if let Some(o) = &ck.optimizer {
        write_block(&o.m)?;
        write_block(&o.v)?;
    }
    out.flush()?;
    Ok(())
}

fn read_block(r: &mut impl Read, n: usize, path: &Path, what: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(|_| {
        err(
            path,
            format!("truncated {what} block (expected {n} values)"),
        )
    })?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(err(path, "not a checkpoint file"));
    }
    line.clear();
    r.read_line(&mut line)?;
    let h: Header =
        serde_json::from_str(line.trim_end()).map_err(|e| err(path, format!("bad header: {e}")))?;
    if h.version != VERSION {
        return Err(err(
            path,
            format!("unsupported version {} (expected {VERSION})", h.version),
        ));
    }
    h.arch.validate().map_err(|e| err(path, e.to_string()))?;
    if h.node_count != h.arch.node_param_count() || h.edge_count != h.arch.edge_param_count() {
        return Err(err(
            path,
            format!(
                "parameter counts {}/{} do not match the architecture ({}/{})",
                h.node_count,
                h.edge_count,
                h.arch.node_param_count(),
                h.arch.edge_param_count()
            ),
        ));
    }
    h.schedule_x
        .validate()
        .map_err(|e| err(path, e.to_string()))?;
    h.schedule_a
        .validate()
        .map_err(|e| err(path, e.to_string()))?;
    let node = read_block(&mut r, h.node_count, path, "node parameter")?;
    let edge = read_block(&mut r, h.edge_count, path, "edge parameter")?;
    let optimizer = match &h.optimizer {
        None => None,
        Some(o) => {
            let n = h.node_count + h.edge_count;
            let m = read_block(&mut r, n, path, "optimizer moment")?;
            let v = read_block(&mut r, n, path, "optimizer moment")?;
            Some(Adam {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                step: o.step,
                m,
                v,
            })
        }
    };
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(err(path, format!("{} trailing bytes", rest.len())));
    }
    let model = ScoreModel {
        arch: h.arch,
        node: ParamSet::from_values(h.arch.node_layout(), node).expect("count checked"),
        edge: ParamSet::from_values(h.arch.edge_layout(), edge).expect("count checked"),
        schedule_x: h.schedule_x,
        schedule_a: h.schedule_a,
        time_floor: h.time_floor,
        role: h.role,
    };
    Ok(Checkpoint {
        model,
        optimizer,
        iteration: h.iteration,
        provenance: h.provenance,
    })
}
