//! Muscle activation onsets from a surface EMG channel.

use serde::{Deserialize, Serialize};

use crate::artifacts::{ratio_or_one, require_seconds, EventKind, EventList};
use crate::config::EmgConfig;
use crate::filter::{clamp_band, design_filter, FilterSpec};
use crate::stats::{merge_runs, moving_rms, percentile, runs};
use crate::DspError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgReport {
    pub onsets: EventList,
    pub baseline: f64,
    pub threshold: f64,
    /// Moving-RMS envelope, one value per input sample.
    #[serde(skip)]
    pub envelope: Vec<f64>,
}

/// Band-pass, rectified moving-RMS envelope, and runs above `factor` times the
/// baseline percentile of that envelope.
pub fn emg_onsets(x: &[f64], fs: f64, cfg: &EmgConfig) -> Result<EmgReport, DspError> {
    require_seconds(x, fs, 1.0)?;
    let (lo, hi) = clamp_band(cfg.band_hz.0, cfg.band_hz.1, fs);
    let bp = design_filter(&FilterSpec::bandpass(lo, hi, cfg.order, fs))?;
    let y: Vec<f64> = bp.filtfilt(x).into_iter().map(f64::abs).collect();
    let width = ((cfg.envelope_s * fs).round() as usize).max(1);
    let envelope = moving_rms(&y, width);
    let baseline = if envelope.is_empty() {
        0.0
    } else {
        percentile(&envelope, cfg.baseline_percentile)
    };
    let threshold = cfg.factor * baseline;
    let mask: Vec<bool> = envelope.iter().map(|&e| e > threshold).collect();
    let gap = ((cfg.merge_gap_s * fs).round() as usize).max(1);
    let min_len = ((cfg.min_duration_s * fs).round() as usize).max(1);
    let mut onsets = EventList::new(EventKind::EmgOnset);
    for (s, e) in merge_runs(&runs(&mask), gap) {
        if e - s < min_len {
            continue;
        }
        let peak = envelope[s..e].iter().copied().fold(0.0, f64::max);
        onsets.push(s as f64 / fs, ratio_or_one(peak, threshold));
    }
    Ok(EmgReport {
        onsets,
        baseline,
        threshold,
        envelope,
    })
}
