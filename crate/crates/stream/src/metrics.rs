//! Rolling server-side metrics: per-channel alpha power and artifact counts.

use std::collections::VecDeque;

use peeg_acquisition::SampleBlock;
use peeg_ads1299::CHANNELS;
use peeg_dsp::{bandpower, detect_blinks, detect_chews, DetectorConfig};

use crate::message::Metrics;

/// Analysis window kept per channel.
pub const WINDOW_S: f64 = 4.0;
/// One METRICS message per this much stream time.
pub const INTERVAL_S: f64 = 1.0;
/// Artifacts are counted on this channel (frontal, where blinks show).
pub const EVENT_CHANNEL: usize = 0;
/// Detections closer than this to a counted event of the same kind are not counted again.
pub const DEDUP_S: f64 = 0.3;

pub struct MetricsEngine {
    cfg: DetectorConfig,
    fs: u32,
    rings: Vec<VecDeque<f64>>,
    /// Samples per channel seen since the engine (re)started, drops excluded.
    consumed: u64,
    next_tick: u64,
    /// Events before this consumed-sample index have been counted.
    counted_until: u64,
    /// Stream times of the last counted events, in consumed-sample seconds.
    last_blink: f64,
    last_chew: f64,
    blinks: u64,
    chews: u64,
    dropped: u64,
}

impl MetricsEngine {
    pub fn new(cfg: DetectorConfig) -> Self {
        Self {
            cfg,
            fs: 0,
            rings: vec![VecDeque::new(); CHANNELS],
            consumed: 0,
            next_tick: 0,
            counted_until: 0,
            last_blink: f64::NEG_INFINITY,
            last_chew: f64::NEG_INFINITY,
            blinks: 0,
            chews: 0,
            dropped: 0,
        }
    }

    fn reset(&mut self, fs: u32) {
        self.fs = fs;
        self.rings.iter_mut().for_each(VecDeque::clear);
        self.consumed = 0;
        self.counted_until = 0;
        self.last_blink = f64::NEG_INFINITY;
        self.last_chew = f64::NEG_INFINITY;
        self.next_tick = self.interval();
    }

    fn interval(&self) -> u64 {
        (f64::from(self.fs) * INTERVAL_S).round().max(1.0) as u64
    }

    fn capacity(&self) -> usize {
        (f64::from(self.fs) * WINDOW_S).round() as usize
    }

    /// Adds a block; returns a summary each time another interval completes.
    pub fn push(&mut self, block: &SampleBlock) -> Option<Metrics> {
        if block.fs != self.fs {
            self.reset(block.fs);
        }
        self.dropped += block.dropped_before;
        if block.dropped_before > 0 {
            // a gap would splice unrelated signal into the window
            self.rings.iter_mut().for_each(VecDeque::clear);
        }
        let cap = self.capacity();
        for (c, ring) in self.rings.iter_mut().enumerate() {
            ring.extend(block.channel(c));
            while ring.len() > cap {
                ring.pop_front();
            }
        }
        self.consumed += block.len() as u64;
        if self.consumed < self.next_tick {
            return None;
        }
        while self.next_tick <= self.consumed {
            self.next_tick += self.interval();
        }
        self.count_events();
        let fs = f64::from(self.fs);
        let window = self.cfg.alpha.window_len(fs);
        let (lo, hi) = self.cfg.alpha.band_hz;
        let alpha_uv2 = if self.rings[0].len() >= window {
            self.rings
                .iter()
                .map(|r| {
                    let x: Vec<f64> = r.iter().copied().collect();
                    bandpower(&x, fs, window, self.cfg.alpha.overlap, lo, hi.min(fs / 2.0)).unwrap_or(0.0)
                })
                .collect()
        } else {
            Vec::new()
        };
        Some(Metrics {
            seq: block.seq,
            t_s: (block.t0_ns as f64 / 1e9) + block.len() as f64 / fs,
            window_s: self.rings[0].len() as f64 / fs,
            alpha_uv2,
            blinks: self.blinks,
            chews: self.chews,
            dropped: self.dropped,
        })
    }

    /// Counts events between the last counted point and one interval
    /// before the newest sample, so each has context on both sides. An
    /// event re-detected up to [`DEDUP_S`] away from one already counted is
    /// the same event seen through a different window.
    fn count_events(&mut self) {
        let fs = f64::from(self.fs);
        let ring = &self.rings[EVENT_CHANNEL];
        let start = self.consumed - ring.len() as u64;
        let upper = self.consumed.saturating_sub(self.interval()) as f64 / fs;
        let lower = (self.counted_until.max(start) as f64 / fs - DEDUP_S).max(start as f64 / fs);
        if upper <= lower || (ring.len() as f64) < fs {
            return;
        }
        self.counted_until = self.consumed.saturating_sub(self.interval());
        let x: Vec<f64> = ring.iter().copied().collect();
        let offset = start as f64 / fs;
        let tally = |times: &[f64], last: &mut f64| {
            let mut n = 0;
            for t in times.iter().map(|t| t + offset) {
                if t >= lower && t < upper && t > *last + DEDUP_S {
                    *last = t;
                    n += 1;
                }
            }
            n
        };
        if let Ok(ev) = detect_blinks(&x, fs, &self.cfg.blink) {
            self.blinks += tally(&ev.times_s, &mut self.last_blink);
        }
        if let Ok(ev) = detect_chews(&x, fs, &self.cfg.chew) {
            self.chews += tally(&ev.times_s, &mut self.last_chew);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use peeg_acquisition::{Overflow, Pacing, Pipeline, PipelineConfig, SimulatorBackend};
    use peeg_ads1299::RegisterFile;

    fn blocks(s: peeg_synth::Scenario) -> Vec<SampleBlock> {
        let cfg = PipelineConfig {
            block_len: 25,
            pacing: Pacing::Unpaced,
            ..Default::default()
        };
        let p = Pipeline::new(Box::new(SimulatorBackend::new(s).unwrap()), RegisterFile::default(), cfg).unwrap();
        let sub = p.subscribe_with(16, Overflow::Block).unwrap();
        p.start().unwrap();
        sub.collect()
    }

    #[test]
    fn one_summary_per_second_and_artifact_totals() {
        let s = peeg_synth::fig7_scenario();
        let duration = s.duration_s;
        let mut engine = MetricsEngine::new(DetectorConfig::default());
        let out: Vec<Metrics> = blocks(s).iter().filter_map(|b| engine.push(b)).collect();
        assert_eq!(out.len(), duration as usize);
        assert!((out[0].t_s - 1.0).abs() < 1e-9);
        assert!(out[0].alpha_uv2.is_empty());
        assert_eq!(out[1].alpha_uv2.len(), 8);
        let last = out.last().unwrap();
        // everything up to one second before the end is counted
        assert_eq!((last.blinks, last.chews), (9, 10));
        assert_eq!(last.dropped, 0);
    }

    #[test]
    fn alpha_power_follows_eye_state() {
        let mut engine = MetricsEngine::new(DetectorConfig::default());
        let out: Vec<Metrics> = blocks(peeg_synth::fig6_scenario()).iter().filter_map(|b| engine.push(b)).collect();
        // window ends at 5 s covers eyes closed only, at 10 s eyes open only
        let closed = out.iter().find(|m| (m.t_s - 5.0).abs() < 1e-9).unwrap();
        let open = out.iter().find(|m| (m.t_s - 10.0).abs() < 1e-9).unwrap();
        assert!(closed.alpha_uv2[7] > 4.0 * open.alpha_uv2[7]);
    }
}
