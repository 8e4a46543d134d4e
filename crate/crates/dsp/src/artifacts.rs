//! Ocular and masticatory artifact detectors.

use serde::{Deserialize, Serialize};

use crate::config::{BlinkConfig, ChewConfig};
use crate::filter::{design_filter, FilterSpec};
use crate::stats::{mad, median, merge_runs, rms, runs};
use crate::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Blink,
    Chew,
    EmgOnset,
    RPeak,
}

/// Detected events in time order. `scores[i]` is the peak value over the
/// detection threshold for `times_s[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventList {
    pub kind: EventKind,
    pub times_s: Vec<f64>,
    pub scores: Vec<f64>,
}

impl EventList {
    pub fn new(kind: EventKind) -> Self {
        Self {
            kind,
            times_s: Vec::new(),
            scores: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub(crate) fn push(&mut self, t: f64, score: f64) {
        self.times_s.push(t);
        self.scores.push(score);
    }
}

pub(crate) fn require_seconds(x: &[f64], fs: f64, seconds: f64) -> Result<(), DspError> {
    let needed = (seconds * fs).ceil() as usize;
    if x.len() < needed {
        return Err(DspError::TooShort {
            needed,
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn ratio_or_one(value: f64, threshold: f64) -> f64 {
    if threshold > 0.0 {
        value / threshold
    } else {
        1.0
    }
}

/// Blink apexes: zero-phase low-pass, then apexes of excursions above
/// `median + k·MAD`, at most one per refractory period. Needs at least one
/// second of input.
pub fn detect_blinks(x: &[f64], fs: f64, cfg: &BlinkConfig) -> Result<EventList, DspError> {
    require_seconds(x, fs, 1.0)?;
    let mut out = EventList::new(EventKind::Blink);
    let lp = design_filter(&FilterSpec::lowpass(cfg.lowpass_hz, cfg.lowpass_order, fs))?;
    let mut y = lp.filtfilt(x);
    if cfg.detrend_hz > 0.0 {
        y = design_filter(&FilterSpec::highpass(cfg.detrend_hz, 2, fs))?.filtfilt(&y);
    }
    let base = median(&y);
    let dev: Vec<f64> = y.iter().map(|v| v - base).collect();
    let threshold = cfg.mad_factor * mad(&y);
    let mask: Vec<bool> = dev.iter().map(|&d| d > threshold).collect();

    let refractory = (cfg.refractory_s * fs).round() as usize;
    let mut accepted: Vec<(usize, f64)> = Vec::new();
    for (s, e) in runs(&mask) {
        let (apex, value) = (s..e)
            .map(|i| (i, dev[i]))
            .fold((s, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        match accepted.last_mut() {
            Some(last) if apex - last.0 < refractory => {
                if value > last.1 {
                    *last = (apex, value);
                }
            }
            _ => accepted.push((apex, value)),
        }
    }
    for (i, v) in accepted {
        out.push(i as f64 / fs, ratio_or_one(v, threshold));
    }
    Ok(out)
}

/// Chewing bursts: band-passed short-time RMS above `k·MAD` of the
/// band-passed signal for at least the minimum duration. One event per burst,
/// timed at the first window over threshold.
pub fn detect_chews(x: &[f64], fs: f64, cfg: &ChewConfig) -> Result<EventList, DspError> {
    require_seconds(x, fs, 1.0)?;
    let mut out = EventList::new(EventKind::Chew);
    let window = ((cfg.window_s * fs).round() as usize).max(1);
    let hop = ((cfg.hop_s * fs).round() as usize).max(1);
    if x.len() < window {
        return Ok(out);
    }
    let bp = design_filter(&FilterSpec::bandpass(cfg.band_hz.0, cfg.band_hz.1, cfg.order, fs))?;
    let y = bp.filtfilt(x);
    let threshold = cfg.mad_factor * mad(&y);
    let env: Vec<f64> = (0..=(y.len() - window) / hop)
        .map(|j| rms(&y[j * hop..j * hop + window]))
        .collect();
    let mask: Vec<bool> = env.iter().map(|&e| e > threshold).collect();
    let gap = (cfg.merge_gap_s / cfg.hop_s).ceil().max(1.0) as usize;
    let min_frames = (cfg.min_duration_s / cfg.hop_s).round().max(1.0) as usize;
    for (s, e) in merge_runs(&runs(&mask), gap) {
        if e - s < min_frames {
            continue;
        }
        let peak = env[s..e].iter().copied().fold(0.0, f64::max);
        out.push((s * hop) as f64 / fs, ratio_or_one(peak, threshold));
    }
    Ok(out)
}
