//! Per-frame model steps: recognition (motion → action, motion → active
//! character) and generation (action info → next pose).

use crate::action::{ActionEmbedding, ActionInfo};
use crate::error::Result;
use crate::motion::{apply_motion_delta, clamp_to_scene, proactive_features, reactive_features, Character, Frame, MotionDelta, Pose, SceneBounds};
use crate::neural::{HeadConditioning, HiddenState, ModelKind, SequenceModel};

/// Recognizers read the raw coordinates of both characters.
pub fn motion2action_step(model: &SequenceModel, state: &HiddenState, frame: &Frame) -> Result<(ActionEmbedding, HiddenState)> {
    model.expect_kind(ModelKind::Motion2Action)?;
    let (y, next) = model.step(&frame.to_array(), state, HeadConditioning::default())?;
    Ok((ActionEmbedding(y), next))
}

/// Argmax over the two logits; equal logits pick character 0.
pub fn motion2char_step(
    model: &SequenceModel,
    state: &HiddenState,
    frame: &Frame,
    action: &ActionEmbedding,
) -> Result<(Character, HiddenState)> {
    model.expect_kind(ModelKind::Motion2Char)?;
    let cond = HeadConditioning { action: Some(action.as_slice()), ..Default::default() };
    let (y, next) = model.step(&frame.to_array(), state, cond)?;
    let active = if y[1] > y[0] { Character::Sym1 } else { Character::Sym0 };
    Ok((active, next))
}

/// A generated pose together with the raw head output it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPose {
    pub pose: Pose,
    pub raw: MotionDelta,
    pub state: HiddenState,
}

/// Next sym0 pose from sym1's observed motion.
pub fn proactive_motion_step(
    model: &SequenceModel,
    state: &HiddenState,
    info: &ActionInfo,
    frame: &Frame,
    prev: Option<&Frame>,
    bounds: &SceneBounds,
) -> Result<GeneratedPose> {
    model.expect_kind(ModelKind::Proactive)?;
    let features = proactive_features(frame, prev)?.to_array();
    let cond = HeadConditioning {
        action: Some(info.embedding.as_slice()),
        indicator: Some(info.active.as_f64()),
        sym0_next: None,
    };
    let (y, next) = model.step(&features, state, cond)?;
    let raw = MotionDelta::new(y[0], y[1], y[2]);
    let pose = clamp_to_scene(apply_motion_delta(frame.poses[0], raw), bounds);
    Ok(GeneratedPose { pose, raw, state: next })
}

/// Next sym1 pose from sym0's observed motion and its already-known next
/// step. The indicator is swapped relative to the proactive call.
pub fn reactive_motion_step(
    model: &SequenceModel,
    state: &HiddenState,
    info: &ActionInfo,
    frame: &Frame,
    prev: Option<&Frame>,
    sym0_next: MotionDelta,
    bounds: &SceneBounds,
) -> Result<GeneratedPose> {
    model.expect_kind(ModelKind::Reactive)?;
    let features = reactive_features(frame, prev)?.to_array();
    let cond = HeadConditioning {
        action: Some(info.embedding.as_slice()),
        indicator: Some(info.active.other().as_f64()),
        sym0_next: Some(sym0_next),
    };
    let (y, next) = model.step(&features, state, cond)?;
    let raw = MotionDelta::new(y[0], y[1], y[2]);
    let pose = clamp_to_scene(apply_motion_delta(frame.poses[1], raw), bounds);
    Ok(GeneratedPose { pose, raw, state: next })
}

/// A pose the user is dragging always wins over the generated one.
pub fn resolve_pose(user: Option<Pose>, generated: Pose) -> Pose {
    user.unwrap_or(generated)
}
