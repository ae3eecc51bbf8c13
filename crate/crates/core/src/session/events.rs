//! The streaming wire protocol: JSON objects tagged by `"type"`.

use serde::{Deserialize, Serialize};

use super::segment::StorySegment;
use crate::action::WeightedAction;
use crate::motion::{Character, Pose};
use crate::pipelines::StorySettings;

pub type SegmentId = u64;
pub type JobId = u64;

/// Client → server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientEvent {
    SetSettings {
        settings: StorySettings,
    },
    PointerFrame {
        #[serde(rename = "char")]
        character: Character,
        x: f64,
        y: f64,
        r: f64,
    },
    /// Releases one character, or both when `char` is absent.
    PointerRelease {
        #[serde(rename = "char", default)]
        character: Option<Character>,
    },
    SetAuto {
        auto: bool,
    },
    GenerateMotionBoth,
    GenerateText {
        #[serde(default)]
        user_prompt: Option<String>,
        #[serde(default)]
        swap_active: bool,
        /// Regenerate this segment instead of the current one.
        #[serde(default)]
        segment: Option<SegmentId>,
    },
    /// Text-first: the sentence becomes the conditioning for the segment's
    /// motion. Without `segment`, a new segment is opened.
    WriteText {
        #[serde(default)]
        segment: Option<SegmentId>,
        text: String,
    },
    /// Changes a segment's text without touching its conditioning.
    EditText {
        segment: SegmentId,
        text: String,
    },
    DeleteAfter {
        frame: usize,
    },
    ResizeSegment {
        segment: SegmentId,
        new_end: usize,
    },
    Seek {
        frame: usize,
    },
    Play,
    Stop,
}

impl ClientEvent {
    /// Events accepted while playback runs.
    pub fn allowed_during_playback(&self) -> bool {
        matches!(self, ClientEvent::Stop | ClientEvent::SetAuto { .. })
    }
}

/// Client messages carry an optional, strictly increasing sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(flatten)]
    pub event: ClientEvent,
}

/// Server → client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEvent {
    Frame {
        t: usize,
        poses: [Pose; 2],
        segment: Option<SegmentId>,
        playback: bool,
    },
    ActionPreview {
        terms: Vec<WeightedAction>,
        active: Character,
    },
    SegmentOpened {
        segment: StorySegment,
    },
    SegmentUpdated {
        segment: StorySegment,
    },
    /// Full segment list after a structural edit.
    Timeline {
        frames: usize,
        cursor: usize,
        segments: Vec<StorySegment>,
    },
    GenerationStarted {
        job: JobId,
        segment: SegmentId,
    },
    TextReady {
        segment: SegmentId,
        text: String,
    },
    PlaybackDone,
    Settings {
        settings: StorySettings,
    },
    Warning {
        message: String,
    },
    Error {
        message: String,
    },
}

/// Every server message carries the session id and a per-session sequence
/// number starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub session: String,
    pub seq: u64,
    #[serde(flatten)]
    pub event: ServerEvent,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn client_wire_shapes() {
        let m: ClientMessage = serde_json::from_value(json!({"type": "pointer_frame", "seq": 3, "char": 1, "x": 0.5, "y": 0.25, "r": 0.0})).unwrap();
        assert_eq!(m.seq, Some(3));
        assert_eq!(m.event, ClientEvent::PointerFrame { character: Character::Sym1, x: 0.5, y: 0.25, r: 0.0 });
        let e: ClientEvent = serde_json::from_value(json!({"type": "pointer_release"})).unwrap();
        assert_eq!(e, ClientEvent::PointerRelease { character: None });
        let e: ClientEvent = serde_json::from_value(json!({"type": "generate_text", "user_prompt": "make it suspenseful", "swap_active": true})).unwrap();
        assert_eq!(e, ClientEvent::GenerateText { user_prompt: Some("make it suspenseful".into()), swap_active: true, segment: None });
        assert!(serde_json::from_value::<ClientEvent>(json!({"type": "pointer_frame", "char": 2, "x": 0, "y": 0, "r": 0})).is_err());
        assert!(serde_json::from_value::<ClientEvent>(json!({"type": "teleport"})).is_err());
        let back = serde_json::to_value(ClientEvent::GenerateMotionBoth).unwrap();
        assert_eq!(back, json!({"type": "generate_motion_both"}));
    }

    #[test]
    fn server_wire_shapes() {
        let m = ServerMessage {
            session: "s1".into(),
            seq: 7,
            event: ServerEvent::TextReady { segment: 2, text: "Mia hugs Tom.".into() },
        };
        assert_eq!(
            serde_json::to_value(&m).unwrap(),
            json!({"session": "s1", "seq": 7, "type": "text_ready", "segment": 2, "text": "Mia hugs Tom."})
        );
        let back: ServerMessage = serde_json::from_value(serde_json::to_value(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
