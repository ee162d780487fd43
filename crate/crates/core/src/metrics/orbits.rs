//! Per-node orbit counts of connected 4-node graphlets.
//!
//! Orbits are numbered 4..=14 in the usual graphlet convention and stored at
//! index `orbit − 4`:
//!
//! | graphlet | orbits |
//! |----------|--------|
//! | path     | 4 end, 5 middle |
//! | star     | 6 leaf, 7 centre |
//! | 4-cycle  | 8 |
//! | paw      | 9 pendant, 10 triangle (degree 2), 11 triangle (degree 3) |
//! | diamond  | 12 degree 2, 13 degree 3 |
//! | clique   | 14 |

use crate::error::{Error, Result};
use crate::graphs::Graph;

pub const NUM_ORBITS: usize = 11;
pub const MAX_ORBIT_NODES: usize = 400;
const WARN_ORBIT_NODES: usize = 60;

/// Orbit index (0-based, i.e. orbit − 4) of a node with induced degree `deg`
/// in a connected graphlet with `edges` induced edges and degree sequence `degs`.
fn classify(edges: u32, degs: [u32; 4], deg: u32) -> usize {
    let max = *degs.iter().max().expect("four nodes");
    match (edges, max) {
        (3, 2) => {
            if deg == 1 {
                0
            } else {
                1
            }
        }
        (3, 3) => {
            if deg == 1 {
                2
            } else {
                3
            }
        }
        (4, 2) => 4,
        (4, 3) => match deg {
            1 => 5,
            2 => 6,
            _ => 7,
        },
        (5, _) => {
            if deg == 2 {
                8
            } else {
                9
            }
        }
        (6, _) => 10,
        _ => unreachable!("disconnected graphlet"),
    }
}

/// Orbit counts for every real node, in slot order of `g.real_nodes()`.
pub fn orbit_counts(g: &Graph) -> Result<Vec<[u64; NUM_ORBITS]>> {
    let nodes = g.real_nodes();
    let v = nodes.len();
    if v > MAX_ORBIT_NODES {
        return Err(Error::TooLarge {
            v,
            limit: MAX_ORBIT_NODES,
        });
    }
    if v > WARN_ORBIT_NODES {
        log::warn!("orbit counting over C({v}, 4) node subsets");
    }
    let a = g.a();
    let adj: Vec<Vec<bool>> = nodes
        .iter()
        .map(|&i| nodes.iter().map(|&j| a[[i, j]] != 0.0).collect())
        .collect();
    let mut out = vec![[0u64; NUM_ORBITS]; v];
    for p in 0..v {
        for q in (p + 1)..v {
            for r in (q + 1)..v {
                let e3 = adj[p][q] as u32 + adj[p][r] as u32 + adj[q][r] as u32;
                for s in (r + 1)..v {
                    let es = adj[p][s] as u32 + adj[q][s] as u32 + adj[r][s] as u32;
                    let edges = e3 + es;
                    if edges < 3 {
                        continue;
                    }
                    let quad = [p, q, r, s];
                    let mut degs = [0u32; 4];
                    for (k, &x) in quad.iter().enumerate() {
                        degs[k] = quad.iter().filter(|&&y| adj[x][y]).count() as u32;
                    }
                    // three edges with a zero-degree node is a triangle plus an isolated node
                    if degs.contains(&0) {
                        continue;
                    }
                    for (k, &x) in quad.iter().enumerate() {
                        out[x][classify(edges, degs, degs[k])] += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Orbit counts summed over nodes, one entry per orbit.
pub fn orbit_totals(g: &Graph) -> Result<Vec<f64>> {
    let per_node = orbit_counts(g)?;
    let mut tot = vec![0.0; NUM_ORBITS];
    for row in &per_node {
        for (t, &c) in tot.iter_mut().zip(row) {
            *t += c as f64;
        }
    }
    Ok(tot)
}
