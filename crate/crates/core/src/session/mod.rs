//! Interactive co-creation sessions: the segment timeline, the event
//! protocol and background text jobs.

mod config;
mod engine;
mod events;
mod log;
mod machine;
mod segment;

pub use config::SessionConfig;
pub use engine::{Engine, JobCompletion, JobOutcome, JobResult, JobSpec, JobTask, Models, OFFLINE_TOKEN_DIM};
pub use events::{ClientEvent, ClientMessage, JobId, SegmentId, ServerEvent, ServerMessage};
pub use log::{read_jsonl, replay, write_jsonl, LogEntry, ReplayMode};
pub use machine::{ExportSegment, Session, StoryExport};
pub use segment::{MotionSource, StorySegment, TextOrigin};
