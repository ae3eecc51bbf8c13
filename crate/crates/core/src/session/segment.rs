use serde::{Deserialize, Serialize};

use super::events::SegmentId;
use crate::action::ActionInfo;
use crate::motion::Character;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextOrigin {
    #[default]
    None,
    UserWritten,
    Generated,
    Edited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionSource {
    #[default]
    None,
    User,
    Generated,
    Mixed,
}

impl MotionSource {
    pub fn merge(self, other: MotionSource) -> MotionSource {
        match (self, other) {
            (MotionSource::None, x) | (x, MotionSource::None) => x,
            (a, b) if a == b => a,
            _ => MotionSource::Mixed,
        }
    }
}

/// A sentence aligned to the half-open frame range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorySegment {
    pub id: SegmentId,
    pub text: String,
    pub start: usize,
    pub end: usize,
    /// Closed segments no longer absorb newly recorded frames.
    pub closed: bool,
    pub text_origin: TextOrigin,
    pub motion: [MotionSource; 2],
    /// Text-derived action info that drives motion generation in this
    /// segment instead of the recognized one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<ActionInfo>,
    /// Most recent recognition over this segment's frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recognized: Option<ActionInfo>,
}

impl StorySegment {
    pub fn new(id: SegmentId, start: usize, end: usize) -> Self {
        StorySegment {
            id,
            text: String::new(),
            start,
            end,
            closed: false,
            text_origin: TextOrigin::None,
            motion: [MotionSource::None; 2],
            conditioning: None,
            recognized: None,
        }
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..self.end).contains(&frame)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn has_text(&self) -> bool {
        !self.text.trim().is_empty()
    }

    /// Action info for generation: text-derived if present, else recognized.
    pub fn action(&self) -> Option<&ActionInfo> {
        self.conditioning.as_ref().or(self.recognized.as_ref())
    }

    pub fn note_motion(&mut self, c: Character, source: MotionSource) {
        self.motion[c.index()] = self.motion[c.index()].merge(source);
    }
}
