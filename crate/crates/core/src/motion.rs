//! Motion data model and the kinematic pre/post-processing used around the
//! sequence models.
//!
//! Positions live in normalized scene units (`[0, 1]²`), rotations are in
//! radians and are never wrapped. Generators emit position *deltas* but an
//! *absolute* rotation, so [`apply_motion_delta`] integrates `x`/`y` and
//! replaces `r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Runtime frame rate of every pipeline.
pub const RUNTIME_FPS: u32 = 10;

/// One of the two character symbols on the playground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Character {
    Sym0,
    Sym1,
}

impl Character {
    pub const BOTH: [Character; 2] = [Character::Sym0, Character::Sym1];

    pub fn index(self) -> usize {
        match self {
            Character::Sym0 => 0,
            Character::Sym1 => 1,
        }
    }

    pub fn other(self) -> Character {
        match self {
            Character::Sym0 => Character::Sym1,
            Character::Sym1 => Character::Sym0,
        }
    }

    pub fn from_index(i: usize) -> Option<Character> {
        match i {
            0 => Some(Character::Sym0),
            1 => Some(Character::Sym1),
            _ => None,
        }
    }

    /// Numeric indicator fed to the generator heads.
    pub fn as_f64(self) -> f64 {
        self.index() as f64
    }
}

impl From<Character> for u8 {
    fn from(c: Character) -> u8 {
        c.index() as u8
    }
}

impl TryFrom<u8> for Character {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        Character::from_index(v as usize).ok_or_else(|| format!("character id must be 0 or 1, got {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, r: f64) -> Self {
        Pose { x, y, r }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.r.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: usize,
    pub poses: [Pose; 2],
}

impl Frame {
    pub fn new(t: usize, sym0: Pose, sym1: Pose) -> Self {
        Frame { t, poses: [sym0, sym1] }
    }

    pub fn pose(&self, c: Character) -> Pose {
        self.poses[c.index()]
    }

    /// Flat `[x0, y0, r0, x1, y1, r1]`, the recognizers' input layout.
    pub fn to_array(&self) -> [f64; 6] {
        let [a, b] = self.poses;
        [a.x, a.y, a.r, b.x, b.y, b.r]
    }

    pub fn from_array(t: usize, v: [f64; 6]) -> Self {
        Frame::new(t, Pose::new(v[0], v[1], v[2]), Pose::new(v[3], v[4], v[5]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub fps: u32,
}

impl Trajectory {
    pub fn new(fps: u32) -> Self {
        Trajectory { frames: Vec::new(), fps }
    }

    /// Builds a trajectory from pose pairs, numbering frames from 0.
    pub fn from_poses(fps: u32, poses: impl IntoIterator<Item = [Pose; 2]>) -> Self {
        let frames = poses
            .into_iter()
            .enumerate()
            .map(|(t, [a, b])| Frame::new(t, a, b))
            .collect();
        Trajectory { frames, fps }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames.len() as f64 / self.fps as f64
    }

    /// Renumbers frames consecutively from 0.
    pub fn renumber(&mut self) {
        for (t, f) in self.frames.iter_mut().enumerate() {
            f.t = t;
        }
    }

    /// Yields `(frame, previous frame)` pairs; the first frame has no predecessor.
    pub fn steps(&self) -> impl Iterator<Item = (&Frame, Option<&Frame>)> {
        self.frames
            .iter()
            .enumerate()
            .map(|(i, f)| (f, i.checked_sub(1).map(|j| &self.frames[j])))
    }
}

/// A generator head's output: position deltas plus an absolute rotation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionDelta {
    pub dx: f64,
    pub dy: f64,
    pub r: f64,
}

impl MotionDelta {
    pub const fn new(dx: f64, dy: f64, r: f64) -> Self {
        MotionDelta { dx, dy, r }
    }

    /// The delta that moves `from` onto `to`.
    pub fn between(from: Pose, to: Pose) -> Self {
        let (dx, dy) = delta(to, from);
        MotionDelta { dx, dy, r: to.r }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.dx, self.dy, self.r]
    }
}

/// The six-wide feature vector consumed by the generator LSTMs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KinematicFeatures {
    pub dx: f64,
    pub dy: f64,
    pub xdist: f64,
    pub ydist: f64,
    pub r0: f64,
    pub r1: f64,
}

impl KinematicFeatures {
    pub const WIDTH: usize = 6;

    pub fn to_array(self) -> [f64; 6] {
        [self.dx, self.dy, self.xdist, self.ydist, self.r0, self.r1]
    }
}

/// Axis-aligned playground rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneBounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl SceneBounds {
    pub const UNIT: SceneBounds = SceneBounds { min_x: 0.0, min_y: 0.0, max_x: 1.0, max_y: 1.0 };

    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        if !(min_x < max_x && min_y < max_y) {
            return Err(Error::InvalidArgument(format!(
                "degenerate scene bounds [{min_x}, {max_x}] x [{min_y}, {max_y}]"
            )));
        }
        Ok(SceneBounds { min_x, min_y, max_x, max_y })
    }

    pub fn contains(&self, p: Pose) -> bool {
        (self.min_x..=self.max_x).contains(&p.x) && (self.min_y..=self.max_y).contains(&p.y)
    }
}

impl Default for SceneBounds {
    fn default() -> Self {
        SceneBounds::UNIT
    }
}

/// Per-step position change `curr - prev`.
pub fn delta(curr: Pose, prev: Pose) -> (f64, f64) {
    (curr.x - prev.x, curr.y - prev.y)
}

/// Signed offset `a - b`; not a Euclidean distance.
pub fn pair_distance(a: Pose, b: Pose) -> (f64, f64) {
    (a.x - b.x, a.y - b.y)
}

fn check_order(frame: &Frame, prev: Option<&Frame>) -> Result<()> {
    match prev {
        Some(p) if p.t + 1 != frame.t => Err(Error::FrameOrder { prev: p.t, curr: frame.t }),
        _ => Ok(()),
    }
}

/// Features for generating sym0: sym1's deltas, the sym1 − sym0 offset and
/// both rotations. A missing previous frame yields zero deltas.
pub fn proactive_features(frame: &Frame, prev: Option<&Frame>) -> Result<KinematicFeatures> {
    check_order(frame, prev)?;
    Ok(assemble(frame, prev, Character::Sym1))
}

/// Mirror of [`proactive_features`] for generating sym1: sym0's deltas and
/// the sym0 − sym1 offset.
pub fn reactive_features(frame: &Frame, prev: Option<&Frame>) -> Result<KinematicFeatures> {
    check_order(frame, prev)?;
    Ok(assemble(frame, prev, Character::Sym0))
}

/// `observed` is the character whose motion is read (not generated).
fn assemble(frame: &Frame, prev: Option<&Frame>, observed: Character) -> KinematicFeatures {
    let cur = frame.pose(observed);
    let (dx, dy) = prev.map_or((0.0, 0.0), |p| delta(cur, p.pose(observed)));
    let (xdist, ydist) = pair_distance(cur, frame.pose(observed.other()));
    KinematicFeatures {
        dx,
        dy,
        xdist,
        ydist,
        r0: frame.poses[0].r,
        r1: frame.poses[1].r,
    }
}

/// Integrates position and replaces rotation.
pub fn apply_motion_delta(curr: Pose, out: MotionDelta) -> Pose {
    Pose::new(curr.x + out.dx, curr.y + out.dy, out.r)
}

pub fn clamp_to_scene(p: Pose, bounds: &SceneBounds) -> Pose {
    Pose::new(p.x.clamp(bounds.min_x, bounds.max_x), p.y.clamp(bounds.min_y, bounds.max_y), p.r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(x: f64, y: f64) -> Pose {
        Pose::new(x, y, 0.0)
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(p(3.0, 4.0), p(1.0, 1.0)), (2.0, 3.0));
        assert_eq!(delta(p(0.5, 0.5), p(0.5, 0.5)), (0.0, 0.0));
        assert_eq!(delta(p(0.0, 0.0), p(1.0, 2.0)), (-1.0, -2.0));
    }

    #[test]
    fn pair_distance_examples() {
        assert_eq!(pair_distance(p(5.0, 5.0), p(2.0, 1.0)), (3.0, 4.0));
        assert_eq!(pair_distance(p(0.3, 0.3), p(0.3, 0.3)), (0.0, 0.0));
        assert_eq!(pair_distance(p(0.0, 0.0), p(3.0, 4.0)), (-3.0, -4.0));
    }

    #[test]
    fn proactive_feature_order() {
        let prev = Frame::new(0, p(2.0, 1.0), p(4.0, 4.0));
        let cur = Frame::new(1, Pose::new(2.0, 1.0, 0.1), Pose::new(5.0, 5.0, 0.2));
        let f = proactive_features(&cur, Some(&prev)).unwrap();
        assert_eq!(f.to_array(), [1.0, 1.0, 3.0, 4.0, 0.1, 0.2]);
    }

    #[test]
    fn stationary_and_first_frame() {
        let a = Frame::new(3, p(2.0, 1.0), p(5.0, 5.0));
        let b = Frame::new(4, p(2.0, 1.0), p(5.0, 5.0));
        let f = proactive_features(&b, Some(&a)).unwrap();
        assert_eq!((f.dx, f.dy, f.xdist, f.ydist), (0.0, 0.0, 3.0, 4.0));

        let moved = Frame::new(0, p(9.0, 9.0), p(5.0, 5.0));
        let f = reactive_features(&moved, None).unwrap();
        assert_eq!((f.dx, f.dy), (0.0, 0.0));
    }

    #[test]
    fn reactive_features_mirror() {
        let prev = Frame::new(0, p(2.0, 0.0), p(5.0, 5.0));
        let cur = Frame::new(1, p(2.0, 1.0), p(5.0, 5.0));
        let r = reactive_features(&cur, Some(&prev)).unwrap();
        assert_eq!((r.dx, r.dy, r.xdist, r.ydist), (0.0, 1.0, -3.0, -4.0));
        let pro = proactive_features(&cur, Some(&prev)).unwrap();
        assert_eq!(r.xdist, -pro.xdist);
        assert_eq!(r.ydist, -pro.ydist);
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let a = Frame::new(2, p(0.0, 0.0), p(1.0, 1.0));
        let b = Frame::new(4, p(0.0, 0.0), p(1.0, 1.0));
        assert!(matches!(proactive_features(&b, Some(&a)), Err(Error::FrameOrder { prev: 2, curr: 4 })));
    }

    #[test]
    fn motion_delta_replaces_rotation() {
        let out = apply_motion_delta(Pose::new(1.0, 2.0, 9.9), MotionDelta::new(0.5, -0.5, 0.3));
        assert_eq!(out, Pose::new(1.5, 1.5, 0.3));
        let c = Pose::new(0.2, 0.7, 1.1);
        assert_eq!(apply_motion_delta(c, MotionDelta::new(0.0, 0.0, c.r)), c);
        assert_eq!(apply_motion_delta(Pose::default(), MotionDelta::new(1.0, 1.0, PI)), Pose::new(1.0, 1.0, PI));
    }

    #[test]
    fn clamp_examples() {
        let b = SceneBounds::UNIT;
        assert_eq!(clamp_to_scene(Pose::new(1.2, 0.5, 3.0), &b), Pose::new(1.0, 0.5, 3.0));
        assert_eq!(clamp_to_scene(Pose::new(0.4, 0.5, 0.0), &b), Pose::new(0.4, 0.5, 0.0));
        assert_eq!(clamp_to_scene(Pose::new(-3.0, -3.0, 0.0), &b), Pose::new(0.0, 0.0, 0.0));
        assert!(SceneBounds::new(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn character_serde_is_numeric() {
        assert_eq!(serde_json::to_string(&Character::Sym1).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Character>("0").unwrap(), Character::Sym0);
        assert!(serde_json::from_str::<Character>("2").is_err());
    }
}
