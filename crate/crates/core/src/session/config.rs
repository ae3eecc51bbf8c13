use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{Pose, SceneBounds, RUNTIME_FPS};

/// Per-session behavior knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub fps: u32,
    /// Pointer silence after which a drag counts as finished.
    pub stop_window_ms: u64,
    /// Initial length of a segment opened from text.
    pub text_first_frames: usize,
    /// Cancel a pending sentence when the user starts dragging again.
    pub cancel_on_resume: bool,
    pub bounds: SceneBounds,
    pub initial_poses: [Pose; 2],
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            fps: RUNTIME_FPS,
            stop_window_ms: 500,
            text_first_frames: 20,
            cancel_on_resume: true,
            bounds: SceneBounds::UNIT,
            initial_poses: [Pose::new(0.3, 0.5, 0.0), Pose::new(0.7, 0.5, std::f64::consts::PI)],
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fps == 0 {
            return Err(Error::InvalidArgument("fps must be positive".into()));
        }
        if self.text_first_frames == 0 {
            return Err(Error::InvalidArgument("text_first_frames must be positive".into()));
        }
        SceneBounds::new(self.bounds.min_x, self.bounds.min_y, self.bounds.max_x, self.bounds.max_y)?;
        Ok(())
    }

    pub fn tick_ms(&self) -> u64 {
        1000 / self.fps as u64
    }
}
