//! Stacked LSTM with explicit state threading and backpropagation through
//! time.
//!
//! Gate layout inside the fused `4H` pre-activation is `[input, forget,
//! cell, output]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{add_assign, matvec_acc, matvec_t_acc, outer_acc, sigmoid, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

impl LstmLayer {
    fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        LstmLayer {
            w_ih: Tensor::uniform(&[4 * hidden, input], bound, rng),
            w_hh: Tensor::uniform(&[4 * hidden, hidden], bound, rng),
            bias: Tensor::uniform(&[4 * hidden], bound, rng),
        }
    }

    fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            w_ih: Tensor::zeros(&[4 * hidden, input]),
            w_hh: Tensor::zeros(&[4 * hidden, hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    fn hidden(&self) -> usize {
        self.w_hh.cols()
    }
}

/// Per-layer `(h, c)` vectors. A fresh state is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl HiddenState {
    pub fn zeros(layers: usize, hidden: usize) -> Self {
        HiddenState { h: vec![vec![0.0; hidden]; layers], c: vec![vec![0.0; hidden]; layers] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentStack {
    pub input: usize,
    pub hidden: usize,
    pub layers: Vec<LstmLayer>,
}

/// Everything one layer needs to backpropagate one time step.
#[derive(Debug, Clone)]
struct LayerCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates, `4H` long.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Recorded forward pass for one time step through all layers.
#[derive(Debug, Clone)]
pub struct StepCache {
    layers: Vec<LayerCache>,
}

impl RecurrentStack {
    pub fn new(input: usize, hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        assert!(layers >= 1 && hidden >= 1 && input >= 1, "stack dimensions must be positive");
        let layers = (0..layers).map(|l| LstmLayer::new(if l == 0 { input } else { hidden }, hidden, rng)).collect();
        RecurrentStack { input, hidden, layers }
    }

    pub fn zeros_like(&self) -> Self {
        RecurrentStack {
            input: self.input,
            hidden: self.hidden,
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayer::zeros(l.w_ih.cols(), l.hidden()))
                .collect(),
        }
    }

    pub fn fresh_state(&self) -> HiddenState {
        HiddenState::zeros(self.layers.len(), self.hidden)
    }

    pub fn tensors(&self) -> impl Iterator<Item = (String, &Tensor)> {
        self.layers.iter().enumerate().flat_map(|(i, l)| {
            [
                (format!("lstm.{i}.w_ih"), &l.w_ih),
                (format!("lstm.{i}.w_hh"), &l.w_hh),
                (format!("lstm.{i}.bias"), &l.bias),
            ]
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w_ih, &mut l.w_hh, &mut l.bias])
    }

    fn check(&self, input: &[f64], state: &HiddenState) -> Result<()> {
        if input.len() != self.input {
            return Err(Error::WidthMismatch { expected: self.input, actual: input.len() });
        }
        if state.h.len() != self.layers.len() || state.h.iter().chain(&state.c).any(|v| v.len() != self.hidden) {
            return Err(Error::InvalidArgument("hidden state does not match the recurrent stack".into()));
        }
        Ok(())
    }

    /// One time step. Returns the top layer's `h` and the advanced state.
    pub fn step(&self, input: &[f64], state: &HiddenState) -> Result<(Vec<f64>, HiddenState)> {
        self.check(input, state)?;
        let mut next = state.clone();
        let out = self.forward(input, &mut next, None);
        Ok((out, next))
    }

    /// Like [`step`](Self::step) but advances `state` in place and records
    /// what backpropagation needs.
    pub fn step_cached(&self, input: &[f64], state: &mut HiddenState) -> Result<(Vec<f64>, StepCache)> {
        self.check(input, state)?;
        let mut cache = StepCache { layers: Vec::with_capacity(self.layers.len()) };
        let out = self.forward(input, state, Some(&mut cache));
        Ok((out, cache))
    }

    fn forward(&self, input: &[f64], state: &mut HiddenState, mut cache: Option<&mut StepCache>) -> Vec<f64> {
        let h = self.hidden;
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.data.clone();
            matvec_acc(&layer.w_ih, &x, &mut z);
            matvec_acc(&layer.w_hh, &state.h[l], &mut z);
            let mut gates = vec![0.0; 4 * h];
            for j in 0..h {
                gates[j] = sigmoid(z[j]);
                gates[h + j] = sigmoid(z[h + j]);
                gates[2 * h + j] = z[2 * h + j].tanh();
                gates[3 * h + j] = sigmoid(z[3 * h + j]);
            }
            let c_prev = std::mem::take(&mut state.c[l]);
            let mut c = vec![0.0; h];
            let mut tanh_c = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for j in 0..h {
                c[j] = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
                tanh_c[j] = c[j].tanh();
                h_new[j] = gates[3 * h + j] * tanh_c[j];
            }
            let h_prev = std::mem::replace(&mut state.h[l], h_new.clone());
            state.c[l] = c;
            if let Some(cache) = cache.as_deref_mut() {
                cache.layers.push(LayerCache { x, h_prev, c_prev, gates, tanh_c });
            }
            x = h_new;
        }
        x
    }

    /// Backpropagation through time over a recorded sequence. `d_outputs[t]`
    /// is the loss gradient w.r.t. the top-layer output at step `t`.
    /// Parameter gradients accumulate into `grads`; returns input gradients.
    pub fn backward(&self, caches: &[StepCache], d_outputs: &[Vec<f64>], grads: &mut RecurrentStack) -> Vec<Vec<f64>> {
        assert_eq!(caches.len(), d_outputs.len());
        let h = self.hidden;
        let n_layers = self.layers.len();
        let mut dh_next = vec![vec![0.0; h]; n_layers];
        let mut dc_next = vec![vec![0.0; h]; n_layers];
        let mut d_inputs = vec![Vec::new(); caches.len()];
        for t in (0..caches.len()).rev() {
            let mut dh_above = d_outputs[t].clone();
            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                let lc = &caches[t].layers[l];
                let g = &mut grads.layers[l];
                let mut dh = dh_above;
                add_assign(&mut dh, &dh_next[l]);
                let mut dz = vec![0.0; 4 * h];
                let mut dc_prev = vec![0.0; h];
                for j in 0..h {
                    let (i, f, gg, o) = (lc.gates[j], lc.gates[h + j], lc.gates[2 * h + j], lc.gates[3 * h + j]);
                    let tc = lc.tanh_c[j];
                    let d_o = dh[j] * tc;
                    let dc = dc_next[l][j] + dh[j] * o * (1.0 - tc * tc);
                    dz[j] = dc * gg * i * (1.0 - i);
                    dz[h + j] = dc * lc.c_prev[j] * f * (1.0 - f);
                    dz[2 * h + j] = dc * i * (1.0 - gg * gg);
                    dz[3 * h + j] = d_o * o * (1.0 - o);
                    dc_prev[j] = dc * f;
                }
                outer_acc(&mut g.w_ih, &dz, &lc.x);
                outer_acc(&mut g.w_hh, &dz, &lc.h_prev);
                add_assign(&mut g.bias.data, &dz);
                let mut dx = vec![0.0; lc.x.len()];
                matvec_t_acc(&layer.w_ih, &dz, &mut dx);
                let mut dh_prev = vec![0.0; h];
                matvec_t_acc(&layer.w_hh, &dz, &mut dh_prev);
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                dh_above = dx;
            }
            d_inputs[t] = dh_above;
        }
        d_inputs
    }
}
