//! Modified teacher forcing for the motion generators.
//!
//! During training the inter-character offset is not measured against the
//! counterpart's ground-truth position at `t`, but against its ground-truth
//! position at `t-1` moved by the counterpart delta the model itself
//! generated for `t`:
//!
//! ```text
//! (xdistᵢₜ, ydistᵢₜ) = (x̄ᵢₜ, ȳᵢₜ) − (x̄ʲₜ₋₁ + d̃xʲₜ, ȳʲₜ₋₁ + d̃yʲₜ),  j = 1 − i
//! ```
//!
//! `i` is the observed character (sym1 for the proactive model, sym0 for the
//! reactive one) and `j` the generated one.

use crate::error::{Error, Result};
use crate::motion::{delta, Character, Frame, KinematicFeatures, MotionDelta, Pose, Trajectory};

/// Which character a generator produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorRole {
    /// Generates sym0, observes sym1.
    Proactive,
    /// Generates sym1, observes sym0.
    Reactive,
}

impl GeneratorRole {
    pub fn generated(self) -> Character {
        match self {
            GeneratorRole::Proactive => Character::Sym0,
            GeneratorRole::Reactive => Character::Sym1,
        }
    }

    pub fn observed(self) -> Character {
        self.generated().other()
    }
}

/// The offset term alone.
pub fn teacher_forced_distance(observed_now: Pose, generated_prev: Pose, generated_delta: (f64, f64)) -> (f64, f64) {
    (
        observed_now.x - (generated_prev.x + generated_delta.0),
        observed_now.y - (generated_prev.y + generated_delta.1),
    )
}

/// Training input for one step. `generated` is the model's own output for
/// frame `frame.t` (produced at the previous step); it is required whenever a
/// previous frame exists. Without a previous frame the plain features apply.
pub fn teacher_forced_features(
    role: GeneratorRole,
    frame: &Frame,
    prev: Option<&Frame>,
    generated: Option<MotionDelta>,
) -> Result<KinematicFeatures> {
    let observed = role.observed();
    let me = frame.pose(observed);
    let Some(prev) = prev else {
        let (xdist, ydist) = crate::motion::pair_distance(me, frame.pose(role.generated()));
        return Ok(KinematicFeatures { dx: 0.0, dy: 0.0, xdist, ydist, r0: frame.poses[0].r, r1: frame.poses[1].r });
    };
    if prev.t + 1 != frame.t {
        return Err(Error::FrameOrder { prev: prev.t, curr: frame.t });
    }
    let gen = generated.ok_or_else(|| {
        Error::InvalidArgument(format!("teacher forcing at frame {} needs the generated output", frame.t))
    })?;
    let (dx, dy) = delta(me, prev.pose(observed));
    let (xdist, ydist) = teacher_forced_distance(me, prev.pose(role.generated()), (gen.dx, gen.dy));
    Ok(KinematicFeatures { dx, dy, xdist, ydist, r0: frame.poses[0].r, r1: frame.poses[1].r })
}

/// Features for a whole ground-truth trajectory. `generated[k]` is the
/// output for frame `k + 1`, so it must hold at least `len - 1` entries.
pub fn teacher_forced_sequence(
    role: GeneratorRole,
    trajectory: &Trajectory,
    generated: &[MotionDelta],
) -> Result<Vec<KinematicFeatures>> {
    trajectory
        .steps()
        .map(|(frame, prev)| {
            let gen = frame.t.checked_sub(1).and_then(|k| generated.get(k)).copied();
            teacher_forced_features(role, frame, prev, gen)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{proactive_features, reactive_features};

    #[test]
    fn substitution_example() {
        let (xd, _) = teacher_forced_distance(Pose::new(5.0, 0.0, 0.0), Pose::new(2.0, 0.0, 0.0), (0.5, 0.0));
        assert_eq!(xd, 2.5);
    }

    #[test]
    fn ground_truth_deltas_reduce_to_plain_features() {
        let prev = Frame::new(0, Pose::new(0.25, 0.5, 0.1), Pose::new(0.75, 0.25, 0.2));
        let cur = Frame::new(1, Pose::new(0.5, 0.625, 0.3), Pose::new(0.875, 0.5, 0.4));
        let g0 = MotionDelta::between(prev.poses[0], cur.poses[0]);
        let g1 = MotionDelta::between(prev.poses[1], cur.poses[1]);
        let tf = teacher_forced_features(GeneratorRole::Proactive, &cur, Some(&prev), Some(g0)).unwrap();
        assert_eq!(tf, proactive_features(&cur, Some(&prev)).unwrap());
        let tf = teacher_forced_features(GeneratorRole::Reactive, &cur, Some(&prev), Some(g1)).unwrap();
        assert_eq!(tf, reactive_features(&cur, Some(&prev)).unwrap());
    }

    #[test]
    fn zero_generated_delta_uses_previous_position() {
        let prev = Frame::new(4, Pose::new(0.25, 0.5, 0.0), Pose::new(0.5, 0.5, 0.0));
        let cur = Frame::new(5, Pose::new(0.75, 0.5, 0.0), Pose::new(0.5, 0.75, 0.0));
        let f = teacher_forced_features(GeneratorRole::Proactive, &cur, Some(&prev), Some(MotionDelta::default())).unwrap();
        assert_eq!((f.xdist, f.ydist), (0.5 - 0.25, 0.75 - 0.5));
    }

    #[test]
    fn missing_generated_output_is_an_error() {
        let prev = Frame::new(0, Pose::default(), Pose::default());
        let cur = Frame::new(1, Pose::default(), Pose::default());
        assert!(teacher_forced_features(GeneratorRole::Reactive, &cur, Some(&prev), None).is_err());
        assert!(teacher_forced_features(GeneratorRole::Reactive, &prev, None, None).is_ok());
        let traj = Trajectory { frames: vec![prev, cur], fps: 10 };
        assert!(teacher_forced_sequence(GeneratorRole::Reactive, &traj, &[]).is_err());
        assert_eq!(teacher_forced_sequence(GeneratorRole::Reactive, &traj, &[MotionDelta::default()]).unwrap().len(), 2);
    }
}
