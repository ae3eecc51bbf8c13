use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{add_assign, matvec_acc, matvec_t_acc, outer_acc, Tensor};
use crate::error::{Error, Result};

/// `W2 · relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardHead {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    x: Vec<f64>,
    pre: Vec<f64>,
}

impl FeedforwardHead {
    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        let b_in = 1.0 / (input as f64).sqrt();
        let b_hid = 1.0 / (hidden as f64).sqrt();
        FeedforwardHead {
            w1: Tensor::uniform(&[hidden, input], b_in, rng),
            b1: Tensor::uniform(&[hidden], b_in, rng),
            w2: Tensor::uniform(&[output, hidden], b_hid, rng),
            b2: Tensor::uniform(&[output], b_hid, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        FeedforwardHead {
            w1: Tensor::zeros(&[hidden, input]),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::zeros(&[output, hidden]),
            b2: Tensor::zeros(&[output]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        FeedforwardHead::zeros(self.input(), self.hidden(), self.output())
    }

    pub fn input(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn output(&self) -> usize {
        self.w2.rows()
    }

    pub fn tensors(&self) -> impl Iterator<Item = (String, &Tensor)> {
        [
            ("head.w1".to_string(), &self.w1),
            ("head.b1".to_string(), &self.b1),
            ("head.w2".to_string(), &self.w2),
            ("head.b2".to_string(), &self.b2),
        ]
        .into_iter()
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2].into_iter()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_cached(x).map(|(y, _)| y)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, HeadCache)> {
        if x.len() != self.input() {
            return Err(Error::WidthMismatch { expected: self.input(), actual: x.len() });
        }
        let mut pre = self.b1.data.clone();
        matvec_acc(&self.w1, x, &mut pre);
        let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let mut y = self.b2.data.clone();
        matvec_acc(&self.w2, &act, &mut y);
        Ok((y, HeadCache { x: x.to_vec(), pre }))
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, cache: &HeadCache, dy: &[f64], grads: &mut FeedforwardHead) -> Vec<f64> {
        let act: Vec<f64> = cache.pre.iter().map(|v| v.max(0.0)).collect();
        outer_acc(&mut grads.w2, dy, &act);
        add_assign(&mut grads.b2.data, dy);
        let mut da = vec![0.0; self.hidden()];
        matvec_t_acc(&self.w2, dy, &mut da);
        let dpre: Vec<f64> = da.iter().zip(&cache.pre).map(|(d, p)| if *p > 0.0 { *d } else { 0.0 }).collect();
        outer_acc(&mut grads.w1, &dpre, &cache.x);
        add_assign(&mut grads.b1.data, &dpre);
        let mut dx = vec![0.0; self.input()];
        matvec_t_acc(&self.w1, &dpre, &mut dx);
        dx
    }
}
