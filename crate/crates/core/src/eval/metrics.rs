//! Concentration and dispersion statistics.

use serde::{Deserialize, Serialize};

use crate::action::cosine_similarity;
use crate::error::{Error, Result};

/// Mean-absolute-difference Gini coefficient, `Σᵢⱼ|wᵢ−wⱼ| / (2n·Σw)`.
///
/// Computed in O(n log n) from the sorted weights: for ascending `w₍ᵢ₎`,
/// `Σᵢⱼ|wᵢ−wⱼ| = 2·Σᵢ (2i − n + 1)·w₍ᵢ₎` with 0-based `i`.
pub fn gini(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("gini of an empty vector".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("gini weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    // Normalizing first keeps one-hot inputs exact: (n − 1)·1 / n.
    let weighted: f64 = sorted.iter().enumerate().map(|(i, w)| (2.0 * i as f64 - n + 1.0) * (w / total)).sum();
    Ok((weighted / n).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Minimum spanning tree over cosine distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub points: usize,
    /// Mean MST edge weight; 0 for a single point.
    pub dispersion: f64,
    pub total_weight: f64,
    pub edges: Vec<MstEdge>,
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Prim's algorithm on the complete cosine-distance graph, O(n²).
pub fn mst_dispersion(vectors: &[Vec<f64>]) -> Result<DiversityReport> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::InvalidArgument("dispersion needs at least one vector".into()));
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(Error::WidthMismatch { expected: dim, actual: v.len() });
        }
        if v.iter().all(|x| *x == 0.0) {
            return Err(Error::ZeroVector);
        }
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    best[0] = 0.0;
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&i, &j| best[i].total_cmp(&best[j]))
            .expect("a vertex remains");
        in_tree[u] = true;
        if u != 0 {
            edges.push(MstEdge { a: parent[u].min(u), b: parent[u].max(u), weight: best[u] });
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = cosine_distance(&vectors[u], &vectors[v])?;
                if d < best[v] {
                    best[v] = d;
                    parent[v] = u;
                }
            }
        }
    }
    let total_weight: f64 = edges.iter().map(|e| e.weight).sum();
    let dispersion = if edges.is_empty() { 0.0 } else { total_weight / edges.len() as f64 };
    Ok(DiversityReport { points: n, dispersion, total_weight, edges })
}

/// Mean with a normal-approximation 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Summary { n, mean, ci_low: mean - half, ci_high: mean + half }
    }
}
