//! Line-delimited dataset files.
//!
//! Line 1 is a header record; every following non-empty line is one graph.
//! Records are JSON objects:
//!
//! ```text
//! {"format":"scoregraph-dataset","version":1,"v_max":20,"feature_dim":8,"count":100,"provenance":"..."}
//! {"v":3,"mask":[3,17],"edges":[[0,1,1.0],[1,2,1.0]],"x":[[0,1,0,...],...]}
//! ```
//!
//! Graph fields, in order:
//! - `v`: number of real nodes.
//! - `mask`: run lengths of alternating real / padded slots, starting with real
//!   (a leading zero run means slot 0 is padding). Runs sum to `v_max`.
//! - `edges`: nonzero strict-upper-triangle entries `[i, j, w]` with `i < j`.
//! - `x`: feature rows of the real nodes, in slot order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, Graph};
use crate::error::{Error, Result};

const FORMAT: &str = "scoregraph-dataset";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    v_max: usize,
    feature_dim: usize,
    count: usize,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    v: usize,
    mask: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
    x: Vec<Vec<f64>>,
}

fn mask_runs(mask: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = true;
    let mut len = 0;
    for &m in mask {
        if m == current {
            len += 1;
        } else {
            runs.push(len);
            current = m;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

fn record_of(g: &Graph) -> Record {
    let n = g.v_max();
    let a = g.a();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = a[[i, j]];
            if w != 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    let x = g
        .real_nodes()
        .into_iter()
        .map(|i| g.x().row(i).to_vec())
        .collect();
    Record {
        v: g.num_nodes(),
        mask: mask_runs(g.mask()),
        edges,
        x,
    }
}

pub fn write_dataset<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        v_max: data.v_max,
        feature_dim: data.feature_dim,
        count: data.len(),
        provenance: data.provenance.clone(),
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&header).map_err(std::io::Error::other)?
    )?;
    for g in &data.graphs {
        let line = serde_json::to_string(&record_of(g)).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file = fs::File::create(path)?;
    write_dataset(data, std::io::BufWriter::new(file))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    read_dataset(file, &path.display().to_string())
}

fn graph_of(rec: Record, v_max: usize, feature_dim: usize) -> std::result::Result<Graph, String> {
    if rec.mask.iter().sum::<usize>() != v_max {
        return Err(format!(
            "mask runs sum to {}, expected {v_max}",
            rec.mask.iter().sum::<usize>()
        ));
    }
    let mut mask = Vec::with_capacity(v_max);
    for (k, &run) in rec.mask.iter().enumerate() {
        mask.extend(std::iter::repeat_n(k % 2 == 0, run));
    }
    let v = mask.iter().filter(|&&m| m).count();
    if v != rec.v {
        return Err(format!("mask has {v} real nodes but v = {}", rec.v));
    }
    let mut a = Array2::zeros((v_max, v_max));
    for &(i, j, w) in &rec.edges {
        if i >= j {
            return Err(format!("edge ({i}, {j}) is not strictly upper-triangular"));
        }
        if j >= v_max || !mask[i] || !mask[j] {
            return Err(format!(
                "edge ({i}, {j}) references a padded or missing node"
            ));
        }
        if !w.is_finite() || w == 0.0 {
            return Err(format!("edge ({i}, {j}) has invalid weight {w}"));
        }
        if a[[i, j]] != 0.0 {
            return Err(format!("duplicate edge ({i}, {j})"));
        }
        a[[i, j]] = w;
        a[[j, i]] = w;
    }
    if rec.x.len() != v {
        return Err(format!("expected {v} feature rows, found {}", rec.x.len()));
    }
    let mut x = Array2::zeros((v_max, feature_dim));
    for (row, slot) in rec.x.iter().zip((0..v_max).filter(|&i| mask[i])) {
        if row.len() != feature_dim {
            return Err(format!(
                "feature row of node {slot} has length {}",
                row.len()
            ));
        }
        for (f, &val) in row.iter().enumerate() {
            x[[slot, f]] = val;
        }
    }
    Graph::new(x, a, mask).map_err(|e| e.to_string())
}

pub fn read_dataset<R: Read>(input: R, name: &str) -> Result<Dataset> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: name.to_string(),
        line,
        msg,
    };
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(parse_err(1, "empty dataset file".into())),
            Some((k, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| parse_err(k + 1, format!("bad header: {e}")))?;
            }
        }
    };
    if header.format != FORMAT || header.version != VERSION {
        return Err(parse_err(
            1,
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    let mut graphs = Vec::with_capacity(header.count);
    let mut last_line = 1;
    for (k, line) in lines {
        let line = line?;
        last_line = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| parse_err(k + 1, e.to_string()))?;
        let g = graph_of(rec, header.v_max, header.feature_dim).map_err(|m| parse_err(k + 1, m))?;
        graphs.push(g);
    }
    if graphs.len() != header.count {
        return Err(parse_err(
            last_line,
            format!(
                "header declares {} graphs, found {}",
                header.count,
                graphs.len()
            ),
        ));
    }
    Dataset::new(graphs, header.v_max, header.feature_dim, header.provenance)
}
