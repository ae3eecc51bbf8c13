//! The per-session state machine. All mutation goes through [`Session::handle`],
//! [`Session::tick`] and [`Session::complete_job`]; each call is logged so a
//! session can be rebuilt from its log.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::SessionConfig;
use super::engine::{Engine, JobCompletion, JobOutcome, JobResult, JobSpec, JobTask};
use super::events::{ClientEvent, ClientMessage, JobId, SegmentId, ServerEvent, ServerMessage};
use super::log::LogEntry;
use super::segment::{MotionSource, StorySegment, TextOrigin};
use crate::action::{topk_weights, ActionInfo, SOFT_PROMPT_K};
use crate::error::{Error, Result};
use crate::motion::{clamp_to_scene, Character, Frame, MotionDelta, Pose};
use crate::neural::HiddenState;
use crate::pipelines::{
    motion2action_step, motion2char_step, proactive_motion_step, reactive_motion_step, resolve_pose, StorySettings,
};

/// Hidden states of the four models, valid for one segment up to a frame.
#[derive(Debug, Clone, PartialEq)]
struct ModelStates {
    segment: Option<SegmentId>,
    /// Frames `[segment.start, upto)` have been consumed by the recognizers
    /// and `[segment.start, upto - 1)` by the generators.
    upto: usize,
    motion2action: HiddenState,
    motion2char: HiddenState,
    proactive: HiddenState,
    reactive: HiddenState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSegment {
    pub id: SegmentId,
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub frames: Vec<Frame>,
}

/// The full story: settings plus every segment with its frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryExport {
    pub settings: StorySettings,
    pub segments: Vec<ExportSegment>,
}

pub struct Session {
    id: String,
    config: SessionConfig,
    engine: Arc<Engine>,
    settings: StorySettings,
    frames: Vec<Frame>,
    segments: Vec<StorySegment>,
    auto: bool,
    control: [Option<Pose>; 2],
    last_pointer_ms: Option<u64>,
    /// Set by dragging, cleared when stop detection has acted on it.
    awaiting_stop: bool,
    cursor: usize,
    states: ModelStates,
    preview: Option<ActionInfo>,
    pending: Option<JobSpec>,
    dispatched: bool,
    generate_both: bool,
    playing: Option<usize>,
    last_client_seq: Option<u64>,
    out_seq: u64,
    next_job: JobId,
    next_segment: SegmentId,
    log: Vec<LogEntry>,
    log_flushed: usize,
    outbox: Vec<ServerMessage>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("frames", &self.frames.len())
            .field("segments", &self.segments.len())
            .field("cursor", &self.cursor)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(id: impl Into<String>, config: SessionConfig, engine: Arc<Engine>) -> Result<Self> {
        Session::with_settings(id, config, StorySettings::default(), engine)
    }

    pub fn with_settings(
        id: impl Into<String>,
        config: SessionConfig,
        settings: StorySettings,
        engine: Arc<Engine>,
    ) -> Result<Self> {
        config.validate()?;
        settings.validate()?;
        let id = id.into();
        let states = fresh_states(&engine, None, 0);
        let log = vec![LogEntry::Open { session: id.clone(), config: config.clone(), settings: settings.clone() }];
        Ok(Session {
            id,
            config,
            engine,
            settings,
            frames: Vec::new(),
            segments: Vec::new(),
            auto: true,
            control: [None, None],
            last_pointer_ms: None,
            awaiting_stop: false,
            cursor: 0,
            states,
            preview: None,
            pending: None,
            dispatched: false,
            generate_both: false,
            playing: None,
            last_client_seq: None,
            out_seq: 0,
            next_job: 1,
            next_segment: 1,
            log,
            log_flushed: 0,
            outbox: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn settings(&self) -> &StorySettings {
        &self.settings
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn segments(&self) -> &[StorySegment] {
        &self.segments
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_auto(&self) -> bool {
        self.auto
    }

    pub fn is_playing(&self) -> bool {
        self.playing.is_some()
    }

    pub fn preview(&self) -> Option<&ActionInfo> {
        self.preview.as_ref()
    }

    /// The outstanding job, dispatched or not.
    pub fn pending_job(&self) -> Option<&JobSpec> {
        self.pending.as_ref()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Log entries added since the previous call.
    pub fn take_new_log_entries(&mut self) -> &[LogEntry] {
        let from = self.log_flushed;
        self.log_flushed = self.log.len();
        &self.log[from..]
    }

    /// Hands out the outstanding job once, for execution by a runner.
    pub fn take_job(&mut self) -> Option<JobSpec> {
        if self.dispatched {
            return None;
        }
        let spec = self.pending.clone()?;
        self.dispatched = true;
        Some(spec)
    }

    pub fn replace_settings(&mut self, settings: StorySettings, now_ms: u64) -> Vec<ServerMessage> {
        self.handle(ClientMessage { seq: None, session: None, event: ClientEvent::SetSettings { settings } }, now_ms)
    }

    pub fn export(&self) -> StoryExport {
        let segments = self
            .segments
            .iter()
            .map(|s| ExportSegment {
                id: s.id,
                text: s.text.clone(),
                start: s.start,
                end: s.end,
                frames: self.frames[s.start.min(self.frames.len())..s.end.min(self.frames.len())].to_vec(),
            })
            .collect();
        StoryExport { settings: self.settings.clone(), segments }
    }

    /// Checks segment tiling, frame numbering and cursor bounds.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (t, f) in self.frames.iter().enumerate() {
            if f.t != t {
                return Err(format!("frame {t} is numbered {}", f.t));
            }
        }
        if self.cursor > self.frames.len() {
            return Err(format!("cursor {} past {} frames", self.cursor, self.frames.len()));
        }
        let Some(last) = self.segments.last() else {
            return if self.frames.is_empty() { Ok(()) } else { Err("frames without segments".into()) };
        };
        let mut expected_start = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start != expected_start {
                return Err(format!("segment {} starts at {}, expected {expected_start}", s.id, s.start));
            }
            if s.end < s.start || (s.end == s.start && (s.closed || i + 1 < self.segments.len())) {
                return Err(format!("segment {} has empty range [{}, {})", s.id, s.start, s.end));
            }
            if i + 1 < self.segments.len() && s.end > self.frames.len() {
                return Err(format!("segment {} ends beyond the recorded frames", s.id));
            }
            expected_start = s.end;
        }
        if last.end < self.frames.len() {
            return Err(format!("frames {}..{} are not covered", last.end, self.frames.len()));
        }
        if let Some(job) = &self.pending {
            if !self.segments.iter().any(|s| s.id == job.segment) {
                return Err(format!("job {} targets a missing segment", job.id));
            }
        }
        Ok(())
    }

    fn emit(&mut self, event: ServerEvent) {
        self.out_seq += 1;
        self.outbox.push(ServerMessage { session: self.id.clone(), seq: self.out_seq, event });
    }

    fn error(&mut self, message: impl Into<String>) {
        self.emit(ServerEvent::Error { message: message.into() });
    }

    fn warning(&mut self, message: impl Into<String>) {
        self.emit(ServerEvent::Warning { message: message.into() });
    }

    fn flush(&mut self) -> Vec<ServerMessage> {
        std::mem::take(&mut self.outbox)
    }

    fn segment_index(&self, id: SegmentId) -> Option<usize> {
        self.segments.iter().position(|s| s.id == id)
    }

    fn segment_at(&self, frame: usize) -> Option<&StorySegment> {
        self.segments.iter().find(|s| s.contains(frame))
    }

    fn emit_segment_updated(&mut self, idx: usize) {
        let segment = self.segments[idx].clone();
        self.emit(ServerEvent::SegmentUpdated { segment });
    }

    fn emit_timeline(&mut self) {
        let event = ServerEvent::Timeline { frames: self.frames.len(), cursor: self.cursor, segments: self.segments.clone() };
        self.emit(event);
    }

    fn open_segment(&mut self, start: usize, end: usize) -> usize {
        let segment = StorySegment::new(self.next_segment, start, end);
        self.next_segment += 1;
        self.segments.push(segment.clone());
        self.emit(ServerEvent::SegmentOpened { segment });
        self.segments.len() - 1
    }

    /// Closes the last segment at the recorded extent so a new one can follow.
    fn close_last(&mut self) {
        let n = self.frames.len();
        if let Some(idx) = self.segments.len().checked_sub(1) {
            let s = &mut self.segments[idx];
            if !s.closed || s.end != n {
                s.closed = true;
                s.end = n.max(s.start);
                self.emit_segment_updated(idx);
            }
        }
    }

    /// Last segment if it has no recorded frames yet (reusable for text).
    fn empty_last(&self) -> Option<usize> {
        let idx = self.segments.len().checked_sub(1)?;
        (self.frames.len() <= self.segments[idx].start).then_some(idx)
    }

    /// Opens a planned text-first segment after the recorded frames, reusing
    /// an empty trailing segment.
    fn planned_segment(&mut self) -> usize {
        if let Some(idx) = self.empty_last() {
            return idx;
        }
        self.close_last();
        let start = self.frames.len();
        self.open_segment(start, start + self.config.text_first_frames)
    }

    fn launch(&mut self, segment: SegmentId, task: JobTask) -> Result<()> {
        if let Some(job) = &self.pending {
            return Err(Error::Session(format!("job {} is still running", job.id)));
        }
        let id = self.next_job;
        self.next_job += 1;
        self.pending = Some(JobSpec { id, segment, task });
        self.dispatched = false;
        self.emit(ServerEvent::GenerationStarted { job: id, segment });
        Ok(())
    }

    fn texts(&self, range: std::ops::Range<usize>) -> Vec<String> {
        self.segments[range].iter().filter(|s| s.has_text()).map(|s| s.text.trim().to_string()).collect()
    }

    fn launch_narrate(&mut self, idx: usize, user_prompt: Option<String>, swap_active: bool) -> Result<()> {
        let seg = &self.segments[idx];
        let mut action = seg
            .recognized
            .clone()
            .or_else(|| seg.conditioning.clone())
            .ok_or_else(|| Error::Session(format!("segment {} has no action to narrate", seg.id)))?;
        if swap_active {
            action.active = action.active.other();
        }
        let task = JobTask::Narrate {
            settings: self.settings.clone(),
            history: self.texts(0..idx),
            following: self.texts(idx + 1..self.segments.len()),
            action,
            user_prompt,
        };
        self.launch(seg.id, task)
    }

    fn fallback_active(&self, idx: Option<usize>) -> Character {
        idx.and_then(|i| self.segments[i].action().map(|a| a.active))
            .or(self.preview.as_ref().map(|p| p.active))
            .unwrap_or(Character::Sym0)
    }

    // ---- client events ----

    pub fn handle(&mut self, msg: ClientMessage, now_ms: u64) -> Vec<ServerMessage> {
        self.log.push(LogEntry::Client { at_ms: now_ms, message: msg.clone() });
        if let Some(seq) = msg.seq {
            if self.last_client_seq.is_some_and(|last| seq <= last) {
                self.error(format!("sequence number {seq} is not increasing"));
                return self.flush();
            }
            self.last_client_seq = Some(seq);
        }
        if msg.session.as_deref().is_some_and(|s| s != self.id) {
            self.error("message addressed to another session");
            return self.flush();
        }
        if self.playing.is_some() && !msg.event.allowed_during_playback() {
            self.error("playback is running; stop it before editing");
            return self.flush();
        }
        if let Err(e) = self.apply(msg.event, now_ms) {
            self.error(e.to_string());
        }
        self.flush()
    }

    fn apply(&mut self, event: ClientEvent, now_ms: u64) -> Result<()> {
        match event {
            ClientEvent::SetSettings { settings } => {
                settings.validate()?;
                self.settings = settings.clone();
                self.emit(ServerEvent::Settings { settings });
            }
            ClientEvent::PointerFrame { character, x, y, r } => {
                let pose = Pose::new(x, y, r);
                if !pose.is_finite() {
                    return Err(Error::InvalidArgument("pointer pose must be finite".into()));
                }
                self.control[character.index()] = Some(clamp_to_scene(pose, &self.config.bounds));
                self.last_pointer_ms = Some(now_ms);
                self.awaiting_stop = true;
                self.cancel_on_resume();
            }
            ClientEvent::PointerRelease { character } => match character {
                Some(c) => self.control[c.index()] = None,
                None => self.control = [None, None],
            },
            ClientEvent::SetAuto { auto } => self.auto = auto,
            ClientEvent::GenerateMotionBoth => self.start_generate_both()?,
            ClientEvent::GenerateText { user_prompt, swap_active, segment } => {
                self.generate_text(user_prompt, swap_active, segment)?
            }
            ClientEvent::WriteText { segment, text } => self.write_text(segment, text)?,
            ClientEvent::EditText { segment, text } => {
                let idx = self.segment_index(segment).ok_or_else(|| Error::Session(format!("no segment {segment}")))?;
                let s = &mut self.segments[idx];
                s.text = text.trim().to_string();
                s.text_origin = match s.text_origin {
                    TextOrigin::None => TextOrigin::UserWritten,
                    TextOrigin::UserWritten => TextOrigin::UserWritten,
                    _ => TextOrigin::Edited,
                };
                self.emit_segment_updated(idx);
            }
            ClientEvent::DeleteAfter { frame } => {
                if frame > self.frames.len() {
                    return Err(Error::InvalidArgument(format!("frame {frame} is past the {} recorded", self.frames.len())));
                }
                self.delete_after(frame);
                self.emit_timeline();
            }
            ClientEvent::ResizeSegment { segment, new_end } => {
                let idx = self.segment_index(segment).ok_or_else(|| Error::Session(format!("no segment {segment}")))?;
                if idx + 1 != self.segments.len() {
                    return Err(Error::Session("only the last segment can be resized".into()));
                }
                let s = &self.segments[idx];
                if new_end <= s.start || new_end < self.frames.len() {
                    return Err(Error::InvalidArgument(format!(
                        "segment {segment} cannot end at {new_end} (starts at {}, {} frames recorded)",
                        s.start,
                        self.frames.len()
                    )));
                }
                self.segments[idx].end = new_end;
                self.emit_segment_updated(idx);
            }
            ClientEvent::Seek { frame } => {
                if frame > self.frames.len() {
                    return Err(Error::InvalidArgument(format!("frame {frame} is past the {} recorded", self.frames.len())));
                }
                self.cursor = frame;
                self.generate_both = false;
                if let Some(f) = self.frames.get(frame).copied() {
                    let segment = self.segment_at(frame).map(|s| s.id);
                    self.emit(ServerEvent::Frame { t: f.t, poses: f.poses, segment, playback: false });
                }
            }
            ClientEvent::Play => {
                if self.frames.is_empty() {
                    return Err(Error::Session("nothing recorded to play".into()));
                }
                self.playing = Some(0);
                self.generate_both = false;
            }
            ClientEvent::Stop => {
                if self.playing.take().is_some() {
                    self.emit(ServerEvent::PlaybackDone);
                }
            }
        }
        Ok(())
    }

    fn cancel_on_resume(&mut self) {
        if !self.config.cancel_on_resume {
            return;
        }
        let Some(job) = &self.pending else { return };
        let current = self.segments.last().filter(|s| !s.closed).map(|s| s.id);
        if matches!(job.task, JobTask::Narrate { .. }) && Some(job.segment) == current {
            let id = job.id;
            self.pending = None;
            self.warning(format!("generation job {id} cancelled: dragging resumed"));
        }
    }

    fn start_generate_both(&mut self) -> Result<()> {
        let n = self.frames.len();
        let idx = self
            .segments
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Session("write a sentence or move a symbol first".into()))?;
        let info = self.segments[idx]
            .action()
            .cloned()
            .or_else(|| self.preview.clone())
            .ok_or_else(|| Error::Session("write a sentence or move a symbol first".into()))?;
        let s = &self.segments[idx];
        // The last segment keeps going while it is open, still has planned
        // room, or has no motion at all yet.
        if !s.closed || n < s.end || n <= s.start {
            let extend = self.config.text_first_frames;
            let s = &mut self.segments[idx];
            if s.action().is_none() {
                s.conditioning = Some(info);
            }
            s.closed = false;
            if s.end <= n {
                s.end = n + extend;
            }
            self.emit_segment_updated(idx);
        } else {
            self.close_last();
            let new = self.open_segment(n, n + self.config.text_first_frames);
            self.segments[new].conditioning = Some(info);
        }
        self.generate_both = true;
        Ok(())
    }

    fn generate_text(&mut self, user_prompt: Option<String>, swap_active: bool, segment: Option<SegmentId>) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::Session("a generation job is already running".into()));
        }
        let user_prompt = user_prompt.map(|p| p.trim().to_string()).filter(|p| !p.is_empty());
        let n = self.frames.len();
        if let Some(id) = segment {
            let idx = self.segment_index(id).ok_or_else(|| Error::Session(format!("no segment {id}")))?;
            if self.segments[idx].start >= n {
                return Err(Error::Session(format!("segment {id} has no recorded motion")));
            }
            return self.launch_narrate(idx, user_prompt, swap_active);
        }
        if let Some(idx) = self.segments.len().checked_sub(1) {
            let s = &self.segments[idx];
            if n > s.start && (!s.closed || !s.has_text()) {
                return self.launch_narrate(idx, user_prompt, swap_active);
            }
        }
        // No motion to describe: compose a sentence first.
        let mut action = self.segments.last().and_then(|s| s.action().cloned()).or_else(|| self.preview.clone());
        if swap_active {
            if let Some(a) = action.as_mut() {
                a.active = a.active.other();
            }
        }
        if action.is_none() && user_prompt.is_none() {
            return Err(Error::Session("give a prompt or move a symbol first".into()));
        }
        let fallback = action.as_ref().map(|a| a.active).unwrap_or(Character::Sym0);
        let idx = self.planned_segment();
        let task = JobTask::Compose {
            settings: self.settings.clone(),
            history: self.texts(0..idx),
            following: Vec::new(),
            action,
            user_prompt,
            fallback,
        };
        self.launch(self.segments[idx].id, task)
    }

    fn write_text(&mut self, segment: Option<SegmentId>, text: String) -> Result<()> {
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(Error::InvalidArgument("sentence is empty".into()));
        }
        if self.pending.is_some() {
            return Err(Error::Session("a generation job is already running".into()));
        }
        let idx = match segment {
            Some(id) => self.segment_index(id).ok_or_else(|| Error::Session(format!("no segment {id}")))?,
            None => self.planned_segment(),
        };
        let fallback = self.fallback_active(Some(idx));
        let s = &mut self.segments[idx];
        s.text = text.clone();
        s.text_origin = TextOrigin::UserWritten;
        let id = s.id;
        self.emit_segment_updated(idx);
        self.launch(id, JobTask::Interpret { settings: self.settings.clone(), sentence: text, fallback })
    }

    /// Truncates the timeline to `frame` frames.
    fn delete_after(&mut self, frame: usize) -> bool {
        self.frames.truncate(frame);
        self.segments.retain(|s| s.start < frame);
        let mut cut = false;
        if let Some(last) = self.segments.last_mut() {
            if last.end > frame {
                last.end = frame;
                cut = true;
            }
        }
        self.cursor = frame;
        self.generate_both = false;
        if let Some(job) = &self.pending {
            if !self.segments.iter().any(|s| s.id == job.segment) {
                let id = job.id;
                self.pending = None;
                self.warning(format!("generation job {id} cancelled: its segment was deleted"));
            }
        }
        if self.states.segment.is_some_and(|id| !self.segments.iter().any(|s| s.id == id)) || self.states.upto > frame {
            self.states.segment = None;
        }
        cut
    }

    // ---- ticks ----

    pub fn tick(&mut self, now_ms: u64) -> Vec<ServerMessage> {
        self.log.push(LogEntry::Tick { at_ms: now_ms });
        if let Some(i) = self.playing {
            if let Some(f) = self.frames.get(i).copied() {
                let segment = self.segment_at(i).map(|s| s.id);
                self.emit(ServerEvent::Frame { t: f.t, poses: f.poses, segment, playback: true });
            }
            if i + 1 >= self.frames.len() {
                self.playing = None;
                self.emit(ServerEvent::PlaybackDone);
            } else {
                self.playing = Some(i + 1);
            }
            return self.flush();
        }
        if self.control.iter().any(Option::is_some) || self.generate_both {
            self.record_frame();
        }
        self.detect_stop(now_ms);
        self.flush()
    }

    /// Replays the segment's frames into fresh states so that recording can
    /// continue at `upto`.
    fn rebuild_states(&mut self, idx: usize, upto: usize) {
        let start = self.segments[idx].start;
        let conditioning = self.segments[idx].conditioning.clone();
        let mut st = fresh_states(&self.engine, Some(self.segments[idx].id), start);
        let mut recognized = None;
        for t in start..upto {
            if t > start {
                if let Some(info) = conditioning.as_ref().or(recognized.as_ref()) {
                    let prev = (t - 1 > start).then(|| self.frames[t - 2]);
                    let _ = step_generators(&self.engine, &mut st, info, &self.frames[t - 1], prev.as_ref(), &self.frames[t], &self.config);
                }
            }
            if let Ok(info) = step_recognizers(&self.engine, &mut st, &self.frames[t]) {
                recognized = Some(info);
            }
            st.upto = t + 1;
        }
        self.states = st;
        if upto > start {
            self.segments[idx].recognized = recognized.clone();
            self.preview = recognized;
        }
    }

    fn record_frame(&mut self) {
        if self.cursor < self.frames.len() {
            if self.delete_after(self.cursor) {
                if let Some(last) = self.segments.last_mut() {
                    last.closed = false;
                    if last.conditioning.is_none() {
                        last.text.clear();
                        last.text_origin = TextOrigin::None;
                    }
                }
            }
            self.emit_timeline();
        }
        let t = self.frames.len();
        let idx = match self.segments.last() {
            Some(s) if !s.closed || t < s.end => self.segments.len() - 1,
            _ => self.open_segment(t, t + 1),
        };
        let seg_id = self.segments[idx].id;
        let start = self.segments[idx].start;
        if self.states.segment != Some(seg_id) || self.states.upto != t {
            self.rebuild_states(idx, t);
        }

        let base = t.checked_sub(1).map(|p| self.frames[p].poses).unwrap_or(self.config.initial_poses);
        let mut poses = [resolve_pose(self.control[0], base[0]), resolve_pose(self.control[1], base[1])];
        if t > start {
            if let Some(info) = self.segments[idx].action().cloned() {
                let last = self.frames[t - 1];
                let prev = (t - 1 > start).then(|| self.frames[t - 2]);
                match generate_next(&self.engine, &mut self.states, &info, &last, prev.as_ref(), self.control, &self.config) {
                    Ok(p) => poses = p,
                    Err(e) => self.warning(format!("motion generation failed, holding poses: {e}")),
                }
            }
        }
        let frame = Frame::new(t, poses[0], poses[1]);
        self.frames.push(frame);
        self.cursor = t + 1;
        let seg = &mut self.segments[idx];
        seg.end = seg.end.max(t + 1);
        for c in Character::BOTH {
            let source = if self.control[c.index()].is_some() { MotionSource::User } else { MotionSource::Generated };
            seg.note_motion(c, source);
        }
        self.emit(ServerEvent::Frame { t, poses, segment: Some(seg_id), playback: false });

        match step_recognizers(&self.engine, &mut self.states, &frame) {
            Ok(info) => {
                self.states.upto = t + 1;
                let terms = topk_weights(&info.embedding, &self.engine.lexicon, SOFT_PROMPT_K).unwrap_or_default();
                self.emit(ServerEvent::ActionPreview { terms, active: info.active });
                self.segments[idx].recognized = Some(info.clone());
                self.preview = Some(info);
            }
            Err(e) => {
                self.states.segment = None;
                self.warning(format!("recognition failed: {e}"));
            }
        }

        if self.generate_both && self.frames.len() >= self.segments[idx].end {
            self.generate_both = false;
            if self.segments[idx].has_text() {
                self.segments[idx].closed = true;
                self.emit_segment_updated(idx);
            } else if self.auto && self.pending.is_none() {
                if let Err(e) = self.launch_narrate(idx, None, false) {
                    self.error(e.to_string());
                }
            }
        }
    }

    fn detect_stop(&mut self, now_ms: u64) {
        if !self.auto || !self.awaiting_stop || self.pending.is_some() {
            return;
        }
        let Some(last) = self.last_pointer_ms else { return };
        if now_ms.saturating_sub(last) < self.config.stop_window_ms {
            return;
        }
        self.awaiting_stop = false;
        let Some(idx) = self.segments.len().checked_sub(1) else { return };
        let s = &self.segments[idx];
        if s.closed || s.has_text() || self.frames.len() <= s.start {
            return;
        }
        if let Err(e) = self.launch_narrate(idx, None, false) {
            self.error(e.to_string());
        }
    }

    // ---- job completion ----

    pub fn complete_job(&mut self, done: JobCompletion, now_ms: u64) -> Vec<ServerMessage> {
        self.log.push(LogEntry::JobDone { at_ms: now_ms, completion: done.clone() });
        let Some(spec) = self.pending.as_ref().filter(|p| p.id == done.job) else {
            return self.flush();
        };
        let seg_id = spec.segment;
        self.pending = None;
        self.dispatched = false;
        let Some(idx) = self.segment_index(seg_id) else {
            return self.flush();
        };
        match done.outcome {
            JobOutcome::Failed { message, .. } => self.error(format!("generation for segment {seg_id} failed: {message}")),
            JobOutcome::Done(JobResult::Narrated { text }) => {
                let is_last = idx + 1 == self.segments.len();
                let n = self.frames.len();
                let s = &mut self.segments[idx];
                s.text = text.clone();
                s.text_origin = TextOrigin::Generated;
                if is_last && !s.closed {
                    s.closed = true;
                    s.end = n.max(s.start + 1);
                }
                self.emit(ServerEvent::TextReady { segment: seg_id, text });
                self.emit_segment_updated(idx);
            }
            JobOutcome::Done(JobResult::Interpreted { info, warning }) => {
                self.apply_conditioning(idx, info, warning);
            }
            JobOutcome::Done(JobResult::Composed { text, info, warning }) => {
                let s = &mut self.segments[idx];
                s.text = text.clone();
                s.text_origin = TextOrigin::Generated;
                self.emit(ServerEvent::TextReady { segment: seg_id, text });
                self.apply_conditioning(idx, info, warning);
            }
        }
        self.flush()
    }

    fn apply_conditioning(&mut self, idx: usize, info: ActionInfo, warning: Option<String>) {
        if let Some(w) = warning {
            self.warning(w);
        }
        let terms = topk_weights(&info.embedding, &self.engine.lexicon, SOFT_PROMPT_K).unwrap_or_default();
        self.emit(ServerEvent::ActionPreview { terms, active: info.active });
        self.segments[idx].conditioning = Some(info);
        self.emit_segment_updated(idx);
    }

    /// True when a tick would neither record, play back nor fire stop
    /// detection, so a driver may skip it.
    pub fn is_idle(&self) -> bool {
        self.playing.is_none()
            && self.control.iter().all(Option::is_none)
            && !self.generate_both
            && !(self.auto && self.awaiting_stop)
    }

    /// Settings and the full timeline, for a client that just connected.
    pub fn snapshot(&mut self, now_ms: u64) -> Vec<ServerMessage> {
        self.log.push(LogEntry::Snapshot { at_ms: now_ms });
        self.emit(ServerEvent::Settings { settings: self.settings.clone() });
        self.emit_timeline();
        self.flush()
    }

    /// Reports input that could not be decoded as a client message.
    pub fn reject(&mut self, reason: impl Into<String>, now_ms: u64) -> Vec<ServerMessage> {
        let reason = reason.into();
        self.log.push(LogEntry::Rejected { at_ms: now_ms, reason: reason.clone() });
        self.error(reason);
        self.flush()
    }

    /// Runs the outstanding job inline on this thread.
    pub fn run_pending_job(&mut self, now_ms: u64) -> Vec<ServerMessage> {
        match self.take_job() {
            Some(spec) => {
                let done = self.engine.run(&spec);
                self.complete_job(done, now_ms)
            }
            None => Vec::new(),
        }
    }
}

fn fresh_states(engine: &Engine, segment: Option<SegmentId>, upto: usize) -> ModelStates {
    let m = &engine.models;
    ModelStates {
        segment,
        upto,
        motion2action: m.motion2action.fresh_state(),
        motion2char: m.motion2char.fresh_state(),
        proactive: m.proactive.fresh_state(),
        reactive: m.reactive.fresh_state(),
    }
}

fn step_recognizers(engine: &Engine, st: &mut ModelStates, frame: &Frame) -> Result<ActionInfo> {
    let (embedding, s1) = motion2action_step(&engine.models.motion2action, &st.motion2action, frame)?;
    let (active, s2) = motion2char_step(&engine.models.motion2char, &st.motion2char, frame, &embedding)?;
    st.motion2action = s1;
    st.motion2char = s2;
    Ok(ActionInfo { embedding, active })
}

/// Steps both generators on `last` and returns the next poses, with
/// user-held poses taking precedence.
fn generate_next(
    engine: &Engine,
    st: &mut ModelStates,
    info: &ActionInfo,
    last: &Frame,
    prev: Option<&Frame>,
    control: [Option<Pose>; 2],
    config: &SessionConfig,
) -> Result<[Pose; 2]> {
    let m = &engine.models;
    let g0 = proactive_motion_step(&m.proactive, &st.proactive, info, last, prev, &config.bounds)?;
    let sym0 = resolve_pose(control[0], g0.pose);
    let sym0_next = MotionDelta::between(last.poses[0], sym0);
    let g1 = reactive_motion_step(&m.reactive, &st.reactive, info, last, prev, sym0_next, &config.bounds)?;
    st.proactive = g0.state;
    st.reactive = g1.state;
    Ok([sym0, resolve_pose(control[1], g1.pose)])
}

/// Generator stepping during a rebuild, where the next frame is known.
fn step_generators(
    engine: &Engine,
    st: &mut ModelStates,
    info: &ActionInfo,
    last: &Frame,
    prev: Option<&Frame>,
    next: &Frame,
    config: &SessionConfig,
) -> Result<()> {
    let m = &engine.models;
    let g0 = proactive_motion_step(&m.proactive, &st.proactive, info, last, prev, &config.bounds)?;
    let sym0_next = MotionDelta::between(last.poses[0], next.poses[0]);
    let g1 = reactive_motion_step(&m.reactive, &st.reactive, info, last, prev, sym0_next, &config.bounds)?;
    st.proactive = g0.state;
    st.reactive = g1.state;
    Ok(())
}
