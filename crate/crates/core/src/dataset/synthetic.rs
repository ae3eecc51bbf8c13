//! Scripted two-character motions for fixtures, demos and overfit checks.
//!
//! Each scenario is a closed-form path for both symbols over normalized time
//! `u ∈ [0, 1]`; rotations turn toward the direction of travel (or the other
//! symbol while standing still) at a bounded rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MotionInstance;
use crate::motion::{Character, Pose, Trajectory};

#[derive(Debug, Clone, Copy)]
struct Scenario {
    label: &'static str,
    active: Character,
    path: fn(f64, &Jitter) -> [(f64, f64); 2],
}

#[derive(Debug, Clone, Copy)]
struct Jitter {
    x: f64,
    y: f64,
    speed: f64,
}

const SCENARIOS: [Scenario; 8] = [
    Scenario {
        label: "approach",
        active: Character::Sym0,
        path: |u, j| [(0.15 + j.x + 0.45 * u * j.speed, 0.5 + j.y), (0.8 + j.x, 0.5 + j.y)],
    },
    Scenario {
        label: "chase",
        active: Character::Sym0,
        path: |u, j| {
            [
                (0.1 + j.x + 0.55 * u * j.speed, 0.25 + j.y + 0.35 * u),
                (0.35 + j.x + 0.45 * u * j.speed, 0.3 + j.y + 0.35 * u),
            ]
        },
    },
    Scenario {
        label: "avoid",
        active: Character::Sym1,
        path: |u, j| [(0.3 + j.x + 0.15 * u, 0.5 + j.y), (0.5 + j.x + 0.2 * u * j.speed, 0.5 + j.y - 0.3 * u)],
    },
    Scenario {
        label: "hug",
        active: Character::Sym0,
        path: |u, j| {
            let close = (u * 1.6).min(1.0);
            [(0.2 + j.x + 0.35 * close, 0.6 + j.y - 0.1 * close), (0.62 + j.x, 0.5 + j.y)]
        },
    },
    Scenario {
        label: "encircle",
        active: Character::Sym0,
        path: |u, j| {
            let a = std::f64::consts::TAU * u * j.speed;
            [(0.5 + j.x + 0.25 * a.cos(), 0.5 + j.y + 0.25 * a.sin()), (0.5 + j.x, 0.5 + j.y)]
        },
    },
    Scenario {
        label: "leave",
        active: Character::Sym1,
        path: |u, j| [(0.4 + j.x, 0.4 + j.y), (0.45 + j.x + 0.4 * u * j.speed, 0.45 + j.y + 0.3 * u)],
    },
    Scenario {
        label: "push",
        active: Character::Sym1,
        path: |u, j| {
            let contact = (u - 0.4).max(0.0);
            [(0.5 + j.x + 0.5 * contact, 0.3 + j.y), (0.15 + j.x + 0.5 * u.min(0.4) + 0.5 * contact, 0.3 + j.y)]
        },
    },
    Scenario {
        label: "follow",
        active: Character::Sym1,
        path: |u, j| {
            [
                (0.4 + j.x + 0.45 * u, 0.7 + j.y - 0.4 * u * j.speed),
                (0.2 + j.x + 0.4 * u, 0.8 + j.y - 0.35 * u * j.speed),
            ]
        },
    },
];

/// Labels of the scripted scenarios, in generation order.
pub fn scenario_labels() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|s| s.label)
}

/// Largest rotation change between consecutive frames, in radians.
const MAX_TURN: f64 = 0.6;

fn unwrap_to(prev: f64, angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    angle + ((prev - angle) / tau).round() * tau
}

fn render(s: &Scenario, jitter: &Jitter, n_frames: usize, fps: u32) -> Trajectory {
    let pos: Vec<[(f64, f64); 2]> = (0..n_frames)
        .map(|i| (s.path)(if n_frames > 1 { i as f64 / (n_frames - 1) as f64 } else { 0.0 }, jitter))
        .collect();
    let mut rot = [0.0f64; 2];
    let mut poses = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let mut frame = [Pose::default(); 2];
        for c in 0..2 {
            let (x, y) = pos[i][c];
            let (nx, ny) = pos[(i + 1).min(n_frames - 1)][c];
            let (px, py) = pos[i.saturating_sub(1)][c];
            let (vx, vy) = (nx - px, ny - py);
            let facing = if vx.hypot(vy) > 1e-6 {
                vy.atan2(vx)
            } else {
                let (ox, oy) = pos[i][1 - c];
                (oy - y).atan2(ox - x)
            };
            rot[c] = if i == 0 {
                facing
            } else {
                rot[c] + (unwrap_to(rot[c], facing) - rot[c]).clamp(-MAX_TURN, MAX_TURN)
            };
            frame[c] = Pose::new(x, y, rot[c]);
        }
        poses.push(frame);
    }
    Trajectory::from_poses(fps, poses)
}

/// `count` instances cycling through the scripted scenarios. The first
/// cycle is unjittered; later cycles get seeded offsets and speeds.
pub fn synthetic_instances(count: usize, n_frames: usize, fps: u32, seed: u64) -> Vec<MotionInstance> {
    assert!(n_frames > 0, "need at least one frame");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let s = &SCENARIOS[i % SCENARIOS.len()];
            let jitter = if i < SCENARIOS.len() {
                Jitter { x: 0.0, y: 0.0, speed: 1.0 }
            } else {
                Jitter { x: rng.random_range(-0.05..0.05), y: rng.random_range(-0.05..0.05), speed: rng.random_range(0.8..1.1) }
            };
            MotionInstance { trajectory: render(s, &jitter, n_frames, fps), label: s.label.to_string(), active: s.active }
        })
        .collect()
}
