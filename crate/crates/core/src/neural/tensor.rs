use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense row-major f64 tensor. Matrices are `[rows, cols]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|_| rng.random_range(-bound..=bound)).collect() }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// `out += W x` for a `[rows, cols]` matrix.
pub(crate) fn matvec_acc(w: &Tensor, x: &[f64], out: &mut [f64]) {
    let cols = w.cols();
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), w.rows());
    for (o, row) in out.iter_mut().zip(w.data.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ d`.
pub(crate) fn matvec_t_acc(w: &Tensor, d: &[f64], out: &mut [f64]) {
    let cols = w.cols();
    debug_assert_eq!(d.len(), w.rows());
    debug_assert_eq!(out.len(), cols);
    for (di, row) in d.iter().zip(w.data.chunks_exact(cols)) {
        if *di == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += di * a;
        }
    }
}

/// `G += d xᵀ`.
pub(crate) fn outer_acc(g: &mut Tensor, d: &[f64], x: &[f64]) {
    let cols = g.cols();
    for (di, row) in d.iter().zip(g.data.chunks_exact_mut(cols)) {
        if *di == 0.0 {
            continue;
        }
        for (o, xv) in row.iter_mut().zip(x) {
            *o += di * xv;
        }
    }
}

pub(crate) fn add_assign(out: &mut [f64], v: &[f64]) {
    for (o, x) in out.iter_mut().zip(v) {
        *o += x;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
