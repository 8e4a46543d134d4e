use std::path::Path;

use peeg_ads1299::{DataRate, CHANNELS};
use serde::{Deserialize, Serialize};

use crate::SynthError;

pub const SCENARIO_VERSION: u32 = 1;

/// Electrode labels of the 10-20 system (with the common 10-10 additions).
pub const TEN_TWENTY_LABELS: &[&str] = &[
    "Fp1", "Fp2", "Fpz", "AF3", "AF4", "AF7", "AF8", "AFz", "F1", "F2", "F3", "F4", "F5", "F6",
    "F7", "F8", "Fz", "FC1", "FC2", "FC3", "FC4", "FC5", "FC6", "FCz", "FT7", "FT8", "T3", "T4",
    "T5", "T6", "T7", "T8", "C1", "C2", "C3", "C4", "C5", "C6", "Cz", "CP1", "CP2", "CP3", "CP4",
    "CP5", "CP6", "CPz", "TP7", "TP8", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "Pz", "PO3",
    "PO4", "PO7", "PO8", "POz", "O1", "O2", "Oz", "A1", "A2", "M1", "M2",
];

/// Surface (non-scalp) electrode prefixes; an optional numeric suffix is allowed.
pub const SURFACE_PREFIXES: &[&str] = &["EMG", "ECG", "EOG"];

pub const DEFAULT_LABELS: [&str; CHANNELS] = ["Fz", "Cz", "Pz", "Oz", "C3", "C4", "O1", "O2"];

pub fn is_valid_label(label: &str) -> bool {
    if TEN_TWENTY_LABELS.contains(&label) {
        return true;
    }
    SURFACE_PREFIXES.iter().any(|prefix| {
        label
            .strip_prefix(prefix)
            .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    Alpha,
    Blink,
    Chew,
    EmgBurst,
    EcgRun,
}

/// Kind-specific event parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    AlphaInterval {
        #[serde(default = "default_alpha_hz")]
        freq_hz: f64,
    },
    Blink,
    Chew {
        #[serde(default = "default_chew_modulation_hz")]
        modulation_hz: f64,
    },
    EmgBurst,
    EcgRun {
        bpm: f64,
    },
}

fn default_alpha_hz() -> f64 {
    10.0
}

fn default_chew_modulation_hz() -> f64 {
    6.0
}

impl EventKind {
    pub fn class(&self) -> EventClass {
        match self {
            EventKind::AlphaInterval { .. } => EventClass::Alpha,
            EventKind::Blink => EventClass::Blink,
            EventKind::Chew { .. } => EventClass::Chew,
            EventKind::EmgBurst => EventClass::EmgBurst,
            EventKind::EcgRun { .. } => EventClass::EcgRun,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(flatten)]
    pub kind: EventKind,
    pub start_s: f64,
    pub length_s: f64,
    pub amplitude_uv: f64,
}

impl Event {
    pub fn new(kind: EventKind, start_s: f64, length_s: f64, amplitude_uv: f64) -> Self {
        Self {
            kind,
            start_s,
            length_s,
            amplitude_uv,
        }
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.length_s
    }
}

/// Per-kind multipliers controlling how strongly each event appears on a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventGains {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub blink: f64,
    #[serde(default)]
    pub chew: f64,
    #[serde(default)]
    pub emg: f64,
    #[serde(default)]
    pub ecg: f64,
}

impl EventGains {
    pub const ALL_ONE: EventGains = EventGains {
        alpha: 1.0,
        blink: 1.0,
        chew: 1.0,
        emg: 1.0,
        ecg: 1.0,
    };
    pub const NONE: EventGains = EventGains {
        alpha: 0.0,
        blink: 0.0,
        chew: 0.0,
        emg: 0.0,
        ecg: 0.0,
    };

    pub fn for_class(&self, class: EventClass) -> f64 {
        match class {
            EventClass::Alpha => self.alpha,
            EventClass::Blink => self.blink,
            EventClass::Chew => self.chew,
            EventClass::EmgBurst => self.emg,
            EventClass::EcgRun => self.ecg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub label: String,
    pub noise_uv_rms: f64,
    #[serde(default)]
    pub mains_hz: u32,
    #[serde(default)]
    pub mains_uv: f64,
    pub event_gain: EventGains,
}

impl ChannelPlan {
    pub fn new(label: &str, noise_uv_rms: f64, event_gain: EventGains) -> Self {
        Self {
            label: label.to_string(),
            noise_uv_rms,
            mains_hz: 0,
            mains_uv: 0.0,
            event_gain,
        }
    }

    pub fn with_mains(mut self, hz: u32, uv: f64) -> Self {
        self.mains_hz = hz;
        self.mains_uv = uv;
        self
    }
}

/// Declarative timeline of synthetic events rendered onto eight channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_version: u32,
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    pub fs: u32,
    pub seed: u64,
    pub channels: Vec<ChannelPlan>,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Scenario {
    /// Empty scenario at `fs` with default labels and `noise_uv_rms` pink noise everywhere.
    pub fn new(duration_s: f64, fs: u32, seed: u64, noise_uv_rms: f64) -> Self {
        Self {
            scenario_version: SCENARIO_VERSION,
            name: String::new(),
            duration_s,
            fs,
            seed,
            channels: DEFAULT_LABELS
                .iter()
                .map(|l| ChannelPlan::new(l, noise_uv_rms, EventGains::ALL_ONE))
                .collect(),
            events: Vec::new(),
        }
    }

    pub fn with_event(mut self, event: Event) -> Self {
        self.events.push(event);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * f64::from(self.fs)).round() as usize
    }

    pub fn labels(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.label.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidScenario(msg));
        if self.scenario_version != SCENARIO_VERSION {
            return Err(SynthError::UnsupportedVersion(self.scenario_version));
        }
        DataRate::from_sps(self.fs).map_err(|_| SynthError::UnsupportedRate(self.fs))?;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration_s));
        }
        if self.channels.len() != CHANNELS {
            return bad(format!("expected {CHANNELS} channels, got {}", self.channels.len()));
        }
        let nyquist = f64::from(self.fs) / 2.0;
        for ch in &self.channels {
            if !is_valid_label(&ch.label) {
                return bad(format!("unknown electrode label {:?}", ch.label));
            }
            if !(ch.noise_uv_rms.is_finite() && ch.noise_uv_rms >= 0.0) {
                return bad(format!("{}: noise must be non-negative", ch.label));
            }
            if ![0, 50, 60].contains(&ch.mains_hz) {
                return bad(format!("{}: mains must be 0, 50 or 60 Hz", ch.label));
            }
            if !(ch.mains_uv.is_finite() && ch.mains_uv >= 0.0) {
                return bad(format!("{}: mains amplitude must be non-negative", ch.label));
            }
        }
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.start_s.is_finite() && ev.start_s >= 0.0 && ev.start_s < self.duration_s) {
                return bad(format!("event {i} starts outside [0, duration)"));
            }
            if !(ev.length_s.is_finite() && ev.length_s > 0.0) {
                return bad(format!("event {i} must have positive length"));
            }
            if !(ev.amplitude_uv.is_finite() && ev.amplitude_uv >= 0.0) {
                return bad(format!("event {i} amplitude must be non-negative"));
            }
            match ev.kind {
                EventKind::EcgRun { bpm } if !(30.0..=240.0).contains(&bpm) => {
                    return bad(format!("event {i}: bpm {bpm} outside [30, 240]"));
                }
                EventKind::AlphaInterval { freq_hz } if !(freq_hz > 0.0 && freq_hz < nyquist) => {
                    return bad(format!("event {i}: alpha frequency {freq_hz} Hz invalid"));
                }
                EventKind::Chew { modulation_hz } if !(modulation_hz > 0.0 && modulation_hz < nyquist) => {
                    return bad(format!("event {i}: chew modulation {modulation_hz} Hz invalid"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("scenario_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCENARIO_VERSION) => {}
            Some(v) => return Err(SynthError::UnsupportedVersion(v as u32)),
            None => {
                return Err(SynthError::InvalidScenario(
                    "missing scenario_version".into(),
                ))
            }
        }
        let scenario: Scenario = serde_json::from_value(value)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
