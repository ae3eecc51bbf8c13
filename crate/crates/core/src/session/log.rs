//! Session logs: every input a session receives, in order, as JSON lines.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::SessionConfig;
use super::engine::{Engine, JobCompletion};
use super::events::ClientMessage;
use super::machine::Session;
use crate::error::{Error, Result};
use crate::pipelines::StorySettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEntry {
    Open { session: String, config: SessionConfig, settings: StorySettings },
    Client { at_ms: u64, message: ClientMessage },
    Tick { at_ms: u64 },
    JobDone { at_ms: u64, completion: JobCompletion },
    Snapshot { at_ms: u64 },
    Rejected { at_ms: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    /// Feed recorded job results back in; needs no text providers.
    UseRecorded,
    /// Re-run each job on the engine at the point it originally finished.
    Recompute,
}

/// Rebuilds a session from its log.
pub fn replay(entries: &[LogEntry], engine: Arc<Engine>, mode: ReplayMode) -> Result<Session> {
    let Some(LogEntry::Open { session, config, settings }) = entries.first() else {
        return Err(Error::Session("log does not start with an open entry".into()));
    };
    let mut s = Session::with_settings(session.clone(), config.clone(), settings.clone(), engine)?;
    for entry in &entries[1..] {
        match entry {
            LogEntry::Open { .. } => return Err(Error::Session("log contains a second open entry".into())),
            LogEntry::Client { at_ms, message } => {
                s.handle(message.clone(), *at_ms);
            }
            LogEntry::Tick { at_ms } => {
                s.tick(*at_ms);
            }
            LogEntry::JobDone { at_ms, completion } => {
                let completion = match mode {
                    ReplayMode::UseRecorded => completion.clone(),
                    ReplayMode::Recompute => match s.pending_job().filter(|j| j.id == completion.job).cloned() {
                        Some(spec) => s.engine().run(&spec),
                        None => completion.clone(),
                    },
                };
                s.complete_job(completion, *at_ms);
            }
            LogEntry::Snapshot { at_ms } => {
                s.snapshot(*at_ms);
            }
            LogEntry::Rejected { at_ms, reason } => {
                s.reject(reason.clone(), *at_ms);
            }
        }
    }
    Ok(s)
}

pub fn write_jsonl(entries: &[LogEntry], mut out: impl Write) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<LogEntry>> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| Error::Session(format!("log line {}: {e}", i + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}
