//! Eyes-closed/eyes-open alpha scoring.
//!
//! Each protocol segment gets its Welch alpha-band power. The segment is
//! labelled eyes-closed when that power exceeds the geometric mean of all
//! segment powers.

use serde::{Deserialize, Serialize};

use crate::config::AlphaConfig;
use crate::spectrum::welch_psd;
use crate::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EyeState {
    Closed,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub expected: EyeState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub start_s: f64,
    pub end_s: f64,
    pub expected: EyeState,
    pub mean_alpha_power: f64,
    pub label: EyeState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub segments: Vec<SegmentScore>,
    /// Geometric mean of the segment powers.
    pub threshold: f64,
    /// Mean alpha power of expected-closed segments over expected-open ones.
    /// `None` when either group is empty or the open mean is zero.
    pub ratio: Option<f64>,
    /// Fraction of segments whose detected label equals the expected one.
    pub sequence_match: f64,
}

pub fn score_alpha(
    x: &[f64],
    fs: f64,
    protocol: &[ProtocolSegment],
    cfg: &AlphaConfig,
) -> Result<AlphaReport, DspError> {
    let window = cfg.window_len(fs);
    if protocol.is_empty() {
        return Err(DspError::TooShort {
            needed: window,
            got: 0,
        });
    }
    let mut powers = Vec::with_capacity(protocol.len());
    for seg in protocol {
        if !(seg.start_s >= 0.0 && seg.end_s > seg.start_s) {
            return Err(DspError::InvalidProtocol(format!(
                "segment [{}, {}) is empty or negative",
                seg.start_s, seg.end_s
            )));
        }
        let lo = (seg.start_s * fs).round() as usize;
        let hi = (seg.end_s * fs).round() as usize;
        if hi > x.len() {
            return Err(DspError::InvalidProtocol(format!(
                "segment ends at {} s, past the {:.3} s record",
                seg.end_s,
                x.len() as f64 / fs
            )));
        }
        let spectrum = welch_psd(&x[lo..hi], fs, window, cfg.overlap)?;
        powers.push(spectrum.bandpower(cfg.band_hz.0, cfg.band_hz.1)?);
    }

    let threshold = if powers.iter().any(|&p| p <= 0.0) {
        0.0
    } else {
        (powers.iter().map(|p| p.ln()).sum::<f64>() / powers.len() as f64).exp()
    };
    let segments: Vec<SegmentScore> = protocol
        .iter()
        .zip(&powers)
        .map(|(seg, &p)| SegmentScore {
            start_s: seg.start_s,
            end_s: seg.end_s,
            expected: seg.expected,
            mean_alpha_power: p,
            label: if p > threshold {
                EyeState::Closed
            } else {
                EyeState::Open
            },
        })
        .collect();

    let mean_of = |state: EyeState| {
        let v: Vec<f64> = segments
            .iter()
            .filter(|s| s.expected == state)
            .map(|s| s.mean_alpha_power)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let ratio = match (mean_of(EyeState::Closed), mean_of(EyeState::Open)) {
        (Some(c), Some(o)) if o > 0.0 => Some(c / o),
        _ => None,
    };
    let matching = segments.iter().filter(|s| s.label == s.expected).count();
    let sequence_match = matching as f64 / segments.len() as f64;
    Ok(AlphaReport {
        segments,
        threshold,
        ratio,
        sequence_match,
    })
}
