//! Matrix operation vocabulary shared by eager evaluation and the gradient tape.
//!
//! The network is written once against [`Ops`]; [`Eager`] evaluates it on
//! plain arrays and [`Tape`] records it for reverse-mode differentiation.

use ndarray::{Array1, Array2, Axis};

use super::params::ParamSet;

pub(crate) trait Ops {
    type T: Clone;

    /// Parameter block `block` of network `net` (0 = node, 1 = edge).
    fn param(&mut self, net: usize, block: usize) -> Self::T;
    fn constant(&mut self, a: Array2<f64>) -> Self::T;
    fn matmul(&mut self, a: &Self::T, b: &Self::T) -> Self::T;
    fn add(&mut self, a: &Self::T, b: &Self::T) -> Self::T;
    /// `a + 1 rᵀ` for a `1 × m` row `r`.
    fn add_row(&mut self, a: &Self::T, row: &Self::T) -> Self::T;
    fn tanh(&mut self, a: &Self::T) -> Self::T;
    /// Multiplies row `i` by `m[i]`.
    fn mask_rows(&mut self, a: &Self::T, m: &Array1<f64>) -> Self::T;
    /// Elementwise product with a constant of the same shape.
    fn mask_full(&mut self, a: &Self::T, m: &Array2<f64>) -> Self::T;
    fn scale(&mut self, a: &Self::T, s: f64) -> Self::T;
    /// Column `k` as an `n × 1` matrix.
    fn column(&mut self, a: &Self::T, k: usize) -> Self::T;
    /// `p 1ᵀ + 1 pᵀ` for an `n × 1` column `p`.
    fn outer_sum(&mut self, p: &Self::T) -> Self::T;
    /// `p pᵀ` for an `n × 1` column `p`.
    fn outer_self(&mut self, p: &Self::T) -> Self::T;
    /// `a · s[0, k]`.
    fn scale_by(&mut self, a: &Self::T, s: &Self::T, k: usize) -> Self::T;
    /// `a + s[0, k]`.
    fn shift_by(&mut self, a: &Self::T, s: &Self::T, k: usize) -> Self::T;
    /// `Σ (a − target)²` as a `1 × 1` value.
    fn sq_err(&mut self, a: &Self::T, target: &Array2<f64>) -> Self::T;
}

pub(crate) struct Eager<'a> {
    pub nets: [&'a ParamSet; 2],
}

impl Ops for Eager<'_> {
    type T = Array2<f64>;

    fn param(&mut self, net: usize, block: usize) -> Array2<f64> {
        self.nets[net].block(block).to_owned()
    }

    fn constant(&mut self, a: Array2<f64>) -> Array2<f64> {
        a
    }

    fn matmul(&mut self, a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        a.dot(b)
    }

    fn add(&mut self, a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        a + b
    }

    fn add_row(&mut self, a: &Array2<f64>, row: &Array2<f64>) -> Array2<f64> {
        a + row
    }

    fn tanh(&mut self, a: &Array2<f64>) -> Array2<f64> {
        a.mapv(f64::tanh)
    }

    fn mask_rows(&mut self, a: &Array2<f64>, m: &Array1<f64>) -> Array2<f64> {
        a * &m.view().insert_axis(Axis(1))
    }

    fn mask_full(&mut self, a: &Array2<f64>, m: &Array2<f64>) -> Array2<f64> {
        a * m
    }

    fn scale(&mut self, a: &Array2<f64>, s: f64) -> Array2<f64> {
        a * s
    }

    fn column(&mut self, a: &Array2<f64>, k: usize) -> Array2<f64> {
        a.column(k).to_owned().insert_axis(Axis(1))
    }

    fn outer_sum(&mut self, p: &Array2<f64>) -> Array2<f64> {
        let col = p.column(0);
        let n = col.len();
        Array2::from_shape_fn((n, n), |(i, j)| col[i] + col[j])
    }

    fn outer_self(&mut self, p: &Array2<f64>) -> Array2<f64> {
        p.dot(&p.t())
    }

    fn scale_by(&mut self, a: &Array2<f64>, s: &Array2<f64>, k: usize) -> Array2<f64> {
        a * s[[0, k]]
    }

    fn shift_by(&mut self, a: &Array2<f64>, s: &Array2<f64>, k: usize) -> Array2<f64> {
        a + s[[0, k]]
    }

    fn sq_err(&mut self, a: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
        let s: f64 = a
            .iter()
            .zip(target.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Array2::from_elem((1, 1), s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Var(usize);

enum Op {
    Leaf,
    Param { net: usize, block: usize },
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Tanh(Var),
    MaskRows(Var, Array1<f64>),
    MaskFull(Var, Array2<f64>),
    Scale(Var, f64),
    Column(Var, usize),
    OuterSum(Var),
    OuterSelf(Var),
    ScaleBy(Var, Var, usize),
    ShiftBy(Var, Var, usize),
    SqErr(Var, Array2<f64>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Reverse-mode gradient tape over small dense matrices.
pub(crate) struct Tape<'a> {
    nets: [&'a ParamSet; 2],
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(nets: [&'a ParamSet; 2]) -> Self {
        Tape {
            nets,
            nodes: Vec::with_capacity(256),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    fn val(&self, v: &Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Backpropagates from the scalar `root`, accumulating parameter
    /// gradients into `grads[net]` (flat, same layout as the parameter sets).
    pub fn backward(&self, root: Var, grads: &mut [Vec<f64>; 2]) {
        let mut adj: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[root.0] = Some(Array2::ones(self.nodes[root.0].value.dim()));

        fn acc(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
            match slot {
                Some(s) => *s += &g,
                None => *slot = Some(g),
            }
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param { net, block } => {
                    let range = self.nets[*net].range(*block);
                    for (dst, src) in grads[*net][range].iter_mut().zip(g.iter()) {
                        *dst += src;
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.val(b).t());
                    let gb = self.val(a).t().dot(&g);
                    acc(&mut adj[a.0], ga);
                    acc(&mut adj[b.0], gb);
                }
                Op::Add(a, b) => {
                    acc(&mut adj[b.0], g.clone());
                    acc(&mut adj[a.0], g);
                }
                Op::AddRow(a, r) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut adj[r.0], gr);
                    acc(&mut adj[a.0], g);
                }
                Op::Tanh(a) => {
                    let ga = ndarray::Zip::from(&g)
                        .and(&node.value)
                        .map_collect(|&gi, &y| gi * (1.0 - y * y));
                    acc(&mut adj[a.0], ga);
                }
                Op::MaskRows(a, m) => {
                    acc(&mut adj[a.0], g * m.view().insert_axis(Axis(1)));
                }
                Op::MaskFull(a, m) => {
                    acc(&mut adj[a.0], g * m);
                }
                Op::Scale(a, s) => {
                    acc(&mut adj[a.0], g * *s);
                }
                Op::Column(a, k) => {
                    let mut ga = Array2::zeros(self.val(a).dim());
                    ga.column_mut(*k).assign(&g.column(0));
                    acc(&mut adj[a.0], ga);
                }
                Op::OuterSum(p) => {
                    let gp = (g.sum_axis(Axis(1)) + g.sum_axis(Axis(0))).insert_axis(Axis(1));
                    acc(&mut adj[p.0], gp);
                }
                Op::OuterSelf(p) => {
                    let pv = self.val(p);
                    let gp = g.dot(pv) + g.t().dot(pv);
                    acc(&mut adj[p.0], gp);
                }
                Op::ScaleBy(a, s, k) => {
                    let sv = self.val(s)[[0, *k]];
                    let dot: f64 = g.iter().zip(self.val(a).iter()).map(|(x, y)| x * y).sum();
                    let mut gs = Array2::zeros(self.val(s).dim());
                    gs[[0, *k]] = dot;
                    acc(&mut adj[s.0], gs);
                    acc(&mut adj[a.0], g * sv);
                }
                Op::ShiftBy(a, s, k) => {
                    let mut gs = Array2::zeros(self.val(s).dim());
                    gs[[0, *k]] = g.sum();
                    acc(&mut adj[s.0], gs);
                    acc(&mut adj[a.0], g);
                }
                Op::SqErr(a, target) => {
                    let scale = g[[0, 0]] * 2.0;
                    let ga = (self.val(a) - target) * scale;
                    acc(&mut adj[a.0], ga);
                }
            }
        }
    }
}

impl Ops for Tape<'_> {
    type T = Var;

    fn param(&mut self, net: usize, block: usize) -> Var {
        let value = self.nets[net].block(block).to_owned();
        self.push(value, Op::Param { net, block })
    }

    fn constant(&mut self, a: Array2<f64>) -> Var {
        self.push(a, Op::Leaf)
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a).dot(self.val(b));
        self.push(v, Op::MatMul(*a, *b))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a) + self.val(b);
        self.push(v, Op::Add(*a, *b))
    }

    fn add_row(&mut self, a: &Var, row: &Var) -> Var {
        let v = self.val(a) + self.val(row);
        self.push(v, Op::AddRow(*a, *row))
    }

    fn tanh(&mut self, a: &Var) -> Var {
        let v = self.val(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(*a))
    }

    fn mask_rows(&mut self, a: &Var, m: &Array1<f64>) -> Var {
        let v = self.val(a) * &m.view().insert_axis(Axis(1));
        self.push(v, Op::MaskRows(*a, m.clone()))
    }

    fn mask_full(&mut self, a: &Var, m: &Array2<f64>) -> Var {
        let v = self.val(a) * m;
        self.push(v, Op::MaskFull(*a, m.clone()))
    }

    fn scale(&mut self, a: &Var, s: f64) -> Var {
        let v = self.val(a) * s;
        self.push(v, Op::Scale(*a, s))
    }

    fn column(&mut self, a: &Var, k: usize) -> Var {
        let v = self.val(a).column(k).to_owned().insert_axis(Axis(1));
        self.push(v, Op::Column(*a, k))
    }

    fn outer_sum(&mut self, p: &Var) -> Var {
        let col = self.val(p).column(0).to_owned();
        let n = col.len();
        let v = Array2::from_shape_fn((n, n), |(i, j)| col[i] + col[j]);
        self.push(v, Op::OuterSum(*p))
    }

    fn outer_self(&mut self, p: &Var) -> Var {
        let pv = self.val(p);
        let v = pv.dot(&pv.t());
        self.push(v, Op::OuterSelf(*p))
    }

    fn scale_by(&mut self, a: &Var, s: &Var, k: usize) -> Var {
        let v = self.val(a) * self.val(s)[[0, k]];
        self.push(v, Op::ScaleBy(*a, *s, k))
    }

    fn shift_by(&mut self, a: &Var, s: &Var, k: usize) -> Var {
        let v = self.val(a) + self.val(s)[[0, k]];
        self.push(v, Op::ShiftBy(*a, *s, k))
    }

    fn sq_err(&mut self, a: &Var, target: &Array2<f64>) -> Var {
        let s: f64 = self
            .val(a)
            .iter()
            .zip(target.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push(Array2::from_elem((1, 1), s), Op::SqErr(*a, target.clone()))
    }
}
