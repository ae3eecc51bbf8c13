//! Independent reference computations shared by the integration tests.
//! Each one is written from the defining formula, without calling the
//! library routine it checks.
#![allow(dead_code)]

pub mod session_fuzz;

use storyplay_core::motion::{Frame, MotionDelta, Pose};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

/// `Σᵢⱼ|wᵢ−wⱼ| / (2n·Σw)` by a double loop.
pub fn gini_pairwise(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let mut s = 0.0;
    for a in w {
        for b in w {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * w.iter().sum::<f64>())
}

/// Minimum total weight over every spanning tree of the complete
/// cosine-distance graph, by trying each (n−1)-edge subset.
pub fn mst_exhaustive(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, 1.0 - cosine(&points[i], &points[j])));
        }
    }
    let mut best = f64::INFINITY;
    let m = edges.len();
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut comp: Vec<usize> = (0..n).collect();
        let mut total = 0.0;
        let mut acyclic = true;
        for (k, &(i, j, w)) in edges.iter().enumerate() {
            if mask & (1 << k) == 0 {
                continue;
            }
            let (ci, cj) = (comp[i], comp[j]);
            if ci == cj {
                acyclic = false;
                break;
            }
            for c in comp.iter_mut() {
                if *c == cj {
                    *c = ci;
                }
            }
            total += w;
        }
        if acyclic && total < best {
            best = total;
        }
    }
    best
}

/// Top-k terms by cosine similarity (ties by index), negatives clamped,
/// L1-normalized, uniform when everything clamps to zero.
pub fn topk_oracle(query: &[f64], table: &[Vec<f64>], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<(usize, f64)> = table.iter().enumerate().map(|(i, v)| (i, cosine(query, v))).collect();
    // insertion sort keeps equal similarities in index order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1].1 < idx[j].1 {
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    idx.truncate(k);
    let clamped: Vec<f64> = idx.iter().map(|(_, s)| if *s > 0.0 { *s } else { 0.0 }).collect();
    let total: f64 = clamped.iter().sum();
    idx.iter()
        .zip(clamped)
        .map(|((i, _), c)| (*i, if total > 0.0 { c / total } else { 1.0 / k as f64 }))
        .collect()
}

/// `Σ wᵢ·Eᵢ` over row-major matrices.
pub fn weighted_matrix_sum(weights: &[f64], mats: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let rows = mats[0].len();
    let cols = mats[0][0].len();
    let mut out = vec![vec![0.0; cols]; rows];
    for (w, m) in weights.iter().zip(mats) {
        for r in 0..rows {
            for c in 0..cols {
                out[r][c] += w * m[r][c];
            }
        }
    }
    out
}

/// Six teacher-forced features for the generator of `gen` (0 or 1), by
/// substitution into the defining expressions:
/// `dx = x̄ⁱₜ − x̄ⁱₜ₋₁`, `xdist = x̄ⁱₜ − (x̄ʲₜ₋₁ + d̃xʲₜ)`, with `i` observed.
pub fn teacher_forcing_oracle(prev: &Frame, cur: &Frame, gen: usize, generated: MotionDelta) -> [f64; 6] {
    let obs = 1 - gen;
    let o_now = cur.poses[obs];
    let o_prev = prev.poses[obs];
    let g_prev = prev.poses[gen];
    [
        o_now.x - o_prev.x,
        o_now.y - o_prev.y,
        o_now.x - (g_prev.x + generated.dx),
        o_now.y - (g_prev.y + generated.dy),
        cur.poses[0].r,
        cur.poses[1].r,
    ]
}

pub fn pose(x: f64, y: f64, r: f64) -> Pose {
    Pose::new(x, y, r)
}
