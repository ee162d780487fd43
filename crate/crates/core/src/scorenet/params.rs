use std::ops::Range;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl BlockSpec {
    pub(crate) fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        BlockSpec {
            name: name.into(),
            rows,
            cols,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter vector with a block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    layout: Vec<BlockSpec>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(layout: Vec<BlockSpec>) -> Self {
        let mut offsets = Vec::with_capacity(layout.len() + 1);
        let mut total = 0;
        for b in &layout {
            offsets.push(total);
            total += b.len();
        }
        offsets.push(total);
        ParamSet {
            layout,
            offsets,
            values: vec![0.0; total],
        }
    }

    pub fn from_values(layout: Vec<BlockSpec>, values: Vec<f64>) -> Option<Self> {
        let mut p = ParamSet::zeros(layout);
        if p.values.len() != values.len() {
            return None;
        }
        p.values = values;
        Some(p)
    }

    pub fn layout(&self) -> &[BlockSpec] {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    pub fn block(&self, block: usize) -> ArrayView2<'_, f64> {
        let b = &self.layout[block];
        ArrayView2::from_shape((b.rows, b.cols), &self.values[self.range(block)])
            .expect("block layout matches storage")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layout.iter().position(|b| b.name == name)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Gaussian init with variance `1 / rows` for weight matrices; blocks whose
    /// names are listed in `zero` (and all `b*` biases) start at zero.
    pub(crate) fn init(&mut self, seed: u64, zero: &[&str]) {
        let mut r = rng::rng_from_seed(seed);
        for (k, b) in self.layout.clone().iter().enumerate() {
            let is_bias = b
                .name
                .rsplit('.')
                .next()
                .is_some_and(|n| n.starts_with('b'));
            let range = self.range(k);
            if is_bias || zero.iter().any(|z| b.name.ends_with(z)) {
                self.values[range].iter_mut().for_each(|v| *v = 0.0);
            } else {
                let sd = (1.0 / b.rows.max(1) as f64).sqrt();
                for v in &mut self.values[range] {
                    *v = sd * rng::normal(&mut r);
                }
            }
        }
    }

    /// Overwrites every entry with a small random value (tests, gradient checks).
    pub fn randomize(&mut self, seed: u64, scale: f64) {
        let mut r = rng::rng_from_seed(seed);
        for v in &mut self.values {
            *v = scale * (2.0 * r.random::<f64>() - 1.0);
        }
    }
}
