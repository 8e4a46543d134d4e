//! Session analyses and their text renderings.

use std::fmt::Write as _;
use std::path::Path;

use peeg_dsp::{
    detect_blinks, detect_chews, detect_r_peaks, emg_onsets, score_alpha, AlphaReport, DetectorConfig, EcgReport,
    EmgReport, EventList, EyeState, ProtocolSegment,
};
use peeg_session::{recover_session, Session};
use serde::Serialize;

use crate::error::CliError;

/// What every report carries besides its findings.
#[derive(Debug, Clone, Serialize)]
pub struct Source {
    pub analysis: &'static str,
    pub channel: String,
    pub fs: u32,
    pub duration_s: f64,
    /// False when the file had no footer and only complete blocks were used.
    pub complete: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaOutput {
    #[serde(flatten)]
    pub source: Source,
    pub band_hz: (f64, f64),
    #[serde(flatten)]
    pub report: AlphaReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactOutput {
    #[serde(flatten)]
    pub source: Source,
    pub blinks: EventList,
    pub chews: EventList,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmgOutput {
    #[serde(flatten)]
    pub source: Source,
    #[serde(flatten)]
    pub report: EmgReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EcgOutput {
    #[serde(flatten)]
    pub source: Source,
    #[serde(flatten)]
    pub report: EcgReport,
}

pub struct Loaded {
    pub session: Session,
    pub channel: usize,
    pub cfg: DetectorConfig,
}

pub fn load(path: &Path, channel: Option<&str>, config: Option<&Path>) -> Result<Loaded, CliError> {
    if !path.is_file() {
        return Err(CliError::Io(format!("{}: no such session file", path.display())));
    }
    let session = recover_session(path)?;
    let labels = &session.header.channel_labels;
    let channel = match channel {
        None => 0,
        Some(c) => match c.parse::<usize>() {
            Ok(i) if i < labels.len() => i,
            Ok(i) => return Err(CliError::Usage(format!("channel {i} out of range 0..{}", labels.len()))),
            Err(_) => labels
                .iter()
                .position(|l| l.eq_ignore_ascii_case(c))
                .ok_or_else(|| CliError::Usage(format!("no channel labelled {c:?}; have {}", labels.join(", "))))?,
        },
    };
    let cfg = match config {
        None => DetectorConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
    };
    if session.blocks.is_empty() {
        return Err(CliError::Usage(format!("{}: session holds no samples", path.display())));
    }
    Ok(Loaded { session, channel, cfg })
}

impl Loaded {
    fn source(&self, analysis: &'static str) -> Source {
        Source {
            analysis,
            channel: self.session.header.channel_labels[self.channel].clone(),
            fs: self.session.header.fs,
            duration_s: self.session.duration_s(),
            complete: self.session.footer.is_some(),
        }
    }

    fn signal(&self) -> (Vec<f64>, f64) {
        (self.session.channel(self.channel), f64::from(self.session.header.fs))
    }
}

fn dsp(e: peeg_dsp::DspError) -> CliError {
    CliError::Usage(e.to_string())
}

/// Alternating segments of `segment_s` covering as much of `duration_s` as fits.
pub fn alternating_protocol(duration_s: f64, segment_s: f64, first: EyeState) -> Vec<ProtocolSegment> {
    let n = (duration_s / segment_s + 1e-9).floor() as usize;
    (0..n)
        .map(|k| ProtocolSegment {
            start_s: k as f64 * segment_s,
            end_s: (k + 1) as f64 * segment_s,
            expected: match (first, k % 2) {
                (EyeState::Closed, 0) | (EyeState::Open, 1) => EyeState::Closed,
                _ => EyeState::Open,
            },
        })
        .collect()
}

pub fn alpha(l: &Loaded, segment_s: f64, first: EyeState) -> Result<AlphaOutput, CliError> {
    if !(segment_s.is_finite() && segment_s > 0.0) {
        return Err(CliError::Usage(format!("segment length {segment_s} must be positive")));
    }
    let (x, fs) = l.signal();
    let protocol = alternating_protocol(x.len() as f64 / fs, segment_s, first);
    if protocol.len() < 2 {
        return Err(CliError::Usage(format!(
            "a {:.1} s session holds fewer than two {segment_s} s segments",
            x.len() as f64 / fs
        )));
    }
    let report = score_alpha(&x, fs, &protocol, &l.cfg.alpha).map_err(dsp)?;
    Ok(AlphaOutput {
        source: l.source("alpha"),
        band_hz: l.cfg.alpha.band_hz,
        report,
    })
}

pub fn artifacts(l: &Loaded) -> Result<ArtifactOutput, CliError> {
    let (x, fs) = l.signal();
    Ok(ArtifactOutput {
        source: l.source("artifacts"),
        blinks: detect_blinks(&x, fs, &l.cfg.blink).map_err(dsp)?,
        chews: detect_chews(&x, fs, &l.cfg.chew).map_err(dsp)?,
    })
}

pub fn emg(l: &Loaded) -> Result<EmgOutput, CliError> {
    let (x, fs) = l.signal();
    Ok(EmgOutput {
        source: l.source("emg"),
        report: emg_onsets(&x, fs, &l.cfg.emg).map_err(dsp)?,
    })
}

pub fn ecg(l: &Loaded) -> Result<EcgOutput, CliError> {
    let (x, fs) = l.signal();
    Ok(EcgOutput {
        source: l.source("ecg"),
        report: detect_r_peaks(&x, fs, &l.cfg.ecg).map_err(dsp)?,
    })
}

fn state(s: EyeState) -> &'static str {
    match s {
        EyeState::Closed => "closed",
        EyeState::Open => "open",
    }
}

fn header(s: &Source) -> String {
    let mut out = format!(
        "{} on {} ({} SPS, {:.3} s)\n",
        s.analysis, s.channel, s.fs, s.duration_s
    );
    if !s.complete {
        out.push_str("note: session has no footer; analysed the complete blocks only\n");
    }
    out
}

fn times(list: &EventList) -> String {
    if list.times_s.is_empty() {
        return "-".into();
    }
    list.times_s.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join(" ")
}

pub fn alpha_text(o: &AlphaOutput) -> String {
    let mut out = header(&o.source);
    let _ = writeln!(out, "band {}-{} Hz", o.band_hz.0, o.band_hz.1);
    let _ = writeln!(out, "{:>8} {:>8}  {:<8} {:<8} {:>14}", "start_s", "end_s", "expected", "detected", "alpha_uV2");
    for s in &o.report.segments {
        let _ = writeln!(
            out,
            "{:>8.2} {:>8.2}  {:<8} {:<8} {:>14.4}",
            s.start_s,
            s.end_s,
            state(s.expected),
            state(s.label),
            s.mean_alpha_power
        );
    }
    let ratio = o.report.ratio.map_or("n/a".to_string(), |r| format!("{r:.3}"));
    let _ = writeln!(out, "threshold {:.4} uV2", o.report.threshold);
    let _ = writeln!(out, "ratio closed/open {ratio}");
    let _ = writeln!(out, "sequence_match {:.3}", o.report.sequence_match);
    out
}

pub fn artifacts_text(o: &ArtifactOutput) -> String {
    let mut out = header(&o.source);
    let _ = writeln!(out, "blinks {}: {}", o.blinks.len(), times(&o.blinks));
    let _ = writeln!(out, "chews {}: {}", o.chews.len(), times(&o.chews));
    out
}

pub fn emg_text(o: &EmgOutput) -> String {
    let mut out = header(&o.source);
    let _ = writeln!(out, "baseline {:.3} uV, threshold {:.3} uV", o.report.baseline, o.report.threshold);
    let _ = writeln!(out, "onsets {}: {}", o.report.onsets.len(), times(&o.report.onsets));
    out
}

pub fn ecg_text(o: &EcgOutput) -> String {
    let mut out = header(&o.source);
    match o.report.mean_hr {
        Some(hr) => {
            let _ = writeln!(out, "mean_hr {hr:.2} bpm");
        }
        None => out.push_str("mean_hr n/a (fewer than two R peaks)\n"),
    }
    let _ = writeln!(out, "r_peaks {}: {}", o.report.peaks.len(), times(&o.report.peaks));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_alternates_and_fits() {
        let p = alternating_protocol(32.0, 5.0, EyeState::Closed);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0].expected, EyeState::Closed);
        assert_eq!(p[1].expected, EyeState::Open);
        assert_eq!(p[5].end_s, 30.0);
        let q = alternating_protocol(30.0, 5.0, EyeState::Open);
        assert_eq!(q.len(), 6);
        assert_eq!(q[0].expected, EyeState::Open);
    }
}
