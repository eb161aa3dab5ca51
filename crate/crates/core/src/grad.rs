//! Sparse per-row gradient buffers.

use crate::math::dispatch;

/// Gradient rows keyed by node id, in first-touch order.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    dim: usize,
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl SparseGrad {
    pub fn new(dim: usize) -> Self {
        Self::with_capacity(dim, 0)
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            nodes: Vec::with_capacity(rows),
            values: Vec::with_capacity(rows * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.values.clear();
    }

    /// Row for `node`, inserted as zeros on first touch. Linear scan: rows
    /// per interaction are few.
    pub fn row_mut(&mut self, node: usize) -> &mut [f64] {
        let slot = self.slot(node);
        &mut self.values[slot * self.dim..(slot + 1) * self.dim]
    }

    fn slot(&mut self, node: usize) -> usize {
        match self.nodes.iter().position(|&n| n == node) {
            Some(s) => s,
            None => {
                self.nodes.push(node);
                self.values.resize(self.values.len() + self.dim, 0.0);
                self.nodes.len() - 1
            }
        }
    }

    /// Disjoint mutable rows for two distinct nodes, inserted on first touch.
    fn two_rows(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        assert_ne!(a, b, "rows must be distinct");
        let (sa, sb) = (self.slot(a), self.slot(b));
        let dim = self.dim;
        if sa < sb {
            let (lo, hi) = self.values.split_at_mut(sb * dim);
            (&mut lo[sa * dim..(sa + 1) * dim], &mut hi[..dim])
        } else {
            let (lo, hi) = self.values.split_at_mut(sa * dim);
            (&mut hi[..dim], &mut lo[sb * dim..(sb + 1) * dim])
        }
    }

    /// Adds `coeff * (za - zb)` to row `a` and subtracts it from row `b`:
    /// the gradient of `coeff/2 * ‖za - zb‖²`. No-op when `a == b`, where
    /// the difference vanishes.
    pub fn add_pair(&mut self, a: usize, b: usize, za: &[f64], zb: &[f64], coeff: f64) {
        if a == b {
            return;
        }
        let (ra, rb) = self.two_rows(a, b);
        pair_kernel(ra, rb, za, zb, coeff);
    }

    /// With `c = [caa, cab, cba, cbb]`, adds `caa·za + cab·zb` to row `a`
    /// and `cba·za + cbb·zb` to row `b`. Panics if `a == b`.
    pub fn add_linear(&mut self, a: usize, b: usize, za: &[f64], zb: &[f64], c: [f64; 4]) {
        let (ra, rb) = self.two_rows(a, b);
        linear_kernel(ra, rb, za, zb, c);
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.nodes
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.dim.max(1)))
    }

    pub fn bytes(&self) -> usize {
        self.nodes.capacity() * std::mem::size_of::<usize>() + self.values.capacity() * std::mem::size_of::<f64>()
    }
}

dispatch! {
    fn pair_kernel(ra: &mut [f64], rb: &mut [f64], za: &[f64], zb: &[f64], coeff: f64) {
        let n = ra.len();
        let (rb, za, zb) = (&mut rb[..n], &za[..n], &zb[..n]);
        for i in 0..n {
            let d = coeff * (za[i] - zb[i]);
            ra[i] += d;
            rb[i] -= d;
        }
    }
}

dispatch! {
    fn linear_kernel(ra: &mut [f64], rb: &mut [f64], za: &[f64], zb: &[f64], c: [f64; 4]) {
        let n = ra.len();
        let (rb, za, zb) = (&mut rb[..n], &za[..n], &zb[..n]);
        let [caa, cab, cba, cbb] = c;
        for i in 0..n {
            ra[i] += caa * za[i] + cab * zb[i];
            rb[i] += cba * za[i] + cbb * zb[i];
        }
    }
}
