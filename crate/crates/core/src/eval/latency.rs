//! Wall-clock cost of the live per-tick pipeline.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{ClientEvent, ClientMessage, Engine, Session, SessionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub n: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Nearest-rank percentile of already sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl LatencyStats {
    pub fn of(samples_ms: &[f64]) -> Result<Self> {
        if samples_ms.is_empty() {
            return Err(Error::InvalidArgument("no latency samples".into()));
        }
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(LatencyStats {
            n: sorted.len(),
            mean_ms: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50_ms: percentile(&sorted, 50.0),
            p95_ms: percentile(&sorted, 95.0),
            max_ms: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub stats: LatencyStats,
    /// Tick cost by frame index, in milliseconds.
    pub samples_ms: Vec<f64>,
}

impl LatencyReport {
    /// Median cost over frames `[center - half, center + half)`.
    pub fn window_median(&self, center: usize, half: usize) -> Option<f64> {
        let lo = center.checked_sub(half)?;
        let mut w = self.samples_ms.get(lo..center + half)?.to_vec();
        w.sort_by(f64::total_cmp);
        Some(w[w.len() / 2])
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            frame: usize,
            ms: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (frame, ms) in self.samples_ms.iter().enumerate() {
            w.serialize(Row { frame, ms: *ms }).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Times `n_frames` session ticks in which both characters are generated,
/// so every tick runs all four models plus timeline bookkeeping. The first
/// `warmup` ticks are run but not reported.
pub fn latency_bench(engine: Arc<Engine>, n_frames: usize, warmup: usize) -> Result<LatencyReport> {
    if n_frames == 0 {
        return Err(Error::InvalidArgument("n_frames must be positive".into()));
    }
    let config = SessionConfig { text_first_frames: n_frames + warmup, ..SessionConfig::default() };
    let tick_ms = config.tick_ms();
    let mut s = Session::new("latency", config, engine)?;
    let send = |s: &mut Session, event, now| s.handle(ClientMessage { seq: None, session: None, event }, now);
    send(&mut s, ClientEvent::SetAuto { auto: false }, 0);
    send(&mut s, ClientEvent::WriteText { segment: None, text: "Mia chases Tom around the clearing.".into() }, 0);
    s.run_pending_job(0);
    send(&mut s, ClientEvent::GenerateMotionBoth, 0);

    let mut samples_ms = Vec::with_capacity(n_frames);
    for i in 0..n_frames + warmup {
        let now = (i as u64 + 1) * tick_ms;
        let t0 = Instant::now();
        let out = s.tick(now);
        let elapsed = t0.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(out);
        if i >= warmup {
            samples_ms.push(elapsed);
        }
    }
    if s.frames().len() != n_frames + warmup {
        return Err(Error::Session(format!("expected {} frames, recorded {}", n_frames + warmup, s.frames().len())));
    }
    Ok(LatencyReport { stats: LatencyStats::of(&samples_ms)?, samples_ms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = LatencyStats::of(&xs).unwrap();
        assert_eq!((s.p50_ms, s.p95_ms, s.max_ms, s.mean_ms), (50.0, 95.0, 100.0, 50.5));
        assert!(LatencyStats::of(&[]).is_err());
    }

    #[test]
    fn small_model_bench_and_csv() {
        let engine = Arc::new(Engine::offline(8, 0));
        let r = latency_bench(engine, 20, 2).unwrap();
        assert_eq!(r.samples_ms.len(), 20);
        assert!(r.window_median(10, 5).is_some());
        assert!(r.window_median(18, 5).is_none());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("frame,ms\n"));
        assert_eq!(text.lines().count(), 21);
    }
}
