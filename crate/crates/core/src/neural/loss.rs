use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    MeanAbsolute,
    MeanSquared,
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    Values(&'a [f64]),
    Class(usize),
}

pub fn loss(kind: LossKind, prediction: &[f64], target: Target<'_>) -> Result<f64> {
    loss_and_grad(kind, prediction, target).map(|(l, _)| l)
}

/// Loss value and its gradient w.r.t. `prediction`, mean-reduced over elements.
pub fn loss_and_grad(kind: LossKind, prediction: &[f64], target: Target<'_>) -> Result<(f64, Vec<f64>)> {
    match (kind, target) {
        (LossKind::MeanAbsolute | LossKind::MeanSquared, Target::Values(t)) => {
            if t.len() != prediction.len() || t.is_empty() {
                return Err(Error::WidthMismatch { expected: prediction.len(), actual: t.len() });
            }
            let n = t.len() as f64;
            let mut total = 0.0;
            let grad = prediction
                .iter()
                .zip(t)
                .map(|(p, y)| {
                    let d = p - y;
                    if kind == LossKind::MeanSquared {
                        total += d * d;
                        2.0 * d / n
                    } else {
                        total += d.abs();
                        d.signum() * f64::from(d != 0.0) / n
                    }
                })
                .collect();
            Ok((total / n, grad))
        }
        (LossKind::CrossEntropy, Target::Class(c)) => {
            if c >= prediction.len() {
                return Err(Error::InvalidArgument(format!(
                    "class {c} out of range for {} logits",
                    prediction.len()
                )));
            }
            let max = prediction.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = prediction.iter().map(|z| (z - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let loss = sum.ln() + max - prediction[c];
            let grad = exps
                .iter()
                .enumerate()
                .map(|(i, e)| e / sum - f64::from(i == c))
                .collect();
            Ok((loss, grad))
        }
        (kind, target) => Err(Error::InvalidArgument(format!("{kind:?} loss cannot take target {target:?}"))),
    }
}
