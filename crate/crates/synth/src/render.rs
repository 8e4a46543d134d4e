use std::f64::consts::PI;

use peeg_ads1299::CHANNELS;
use serde::{Deserialize, Serialize};

use crate::noise::{band_noise, mix64, PinkNoise};
use crate::scenario::{Event, EventClass, EventKind, Scenario};
use crate::SynthError;

const ALPHA_RAMP_S: f64 = 0.25;
const BURST_RAMP_S: f64 = 0.05;
const CHEW_BAND_HZ: (f64, f64) = (20.0, 50.0);
const EMG_BAND_HZ: (f64, f64) = (20.0, 120.0);
const CHEW_MODULATION_DEPTH: f64 = 0.25;

/// PQRST template: (centre offset from R at 60 bpm in s, width sigma in s,
/// amplitude relative to R, whether the offset stretches with the RR interval).
const PQRST: [(f64, f64, f64, bool); 5] = [
    (-0.20, 0.025, 0.15, true),
    (-0.03, 0.010, -0.15, false),
    (0.00, 0.012, 1.00, false),
    (0.03, 0.010, -0.25, false),
    (0.30, 0.060, 0.30, true),
];

/// One event as it was rendered, with the marker times analyses should recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub class: EventClass,
    pub start_s: f64,
    pub end_s: f64,
    /// Blink apex, chew/EMG onset, or every R-peak of an ECG run.
    pub markers_s: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<TruthEvent>,
}

impl GroundTruth {
    fn markers(&self, class: EventClass) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .events
            .iter()
            .filter(|e| e.class == class)
            .flat_map(|e| e.markers_s.iter().copied())
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn count(&self, class: EventClass) -> usize {
        self.events.iter().filter(|e| e.class == class).count()
    }

    pub fn blink_apexes(&self) -> Vec<f64> {
        self.markers(EventClass::Blink)
    }

    pub fn chew_onsets(&self) -> Vec<f64> {
        self.markers(EventClass::Chew)
    }

    pub fn emg_onsets(&self) -> Vec<f64> {
        self.markers(EventClass::EmgBurst)
    }

    pub fn r_peaks(&self) -> Vec<f64> {
        self.markers(EventClass::EcgRun)
    }

    pub fn alpha_intervals(&self) -> Vec<(f64, f64)> {
        self.events
            .iter()
            .filter(|e| e.class == EventClass::Alpha)
            .map(|e| (e.start_s, e.end_s))
            .collect()
    }
}

/// A fully rendered scenario: channel-major µV samples plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub fs: u32,
    pub labels: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    pub truth: GroundTruth,
}

impl Rendering {
    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn render(scenario: &Scenario) -> Result<Rendering, SynthError> {
    let stream = RenderStream::new(scenario)?;
    let truth = stream.truth().clone();
    let n = scenario.sample_count();
    let mut channels = vec![Vec::with_capacity(n); CHANNELS];
    for frame in stream {
        for (ch, v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(Rendering {
        fs: scenario.fs,
        labels: scenario.labels(),
        channels,
        truth,
    })
}

struct PreparedEvent {
    start: usize,
    samples: Vec<f64>,
    class: EventClass,
}

/// Incremental renderer yielding one 8-channel frame of µV per sample.
///
/// Event waveforms are prepared up front (they are short and bounded);
/// background noise is generated as the stream advances.
pub struct RenderStream {
    fs: f64,
    len: usize,
    next: usize,
    pink: Vec<PinkNoise>,
    noise_rms: [f64; CHANNELS],
    mains: [(f64, f64); CHANNELS],
    channel_gains: Vec<[f64; CHANNELS]>,
    events: Vec<PreparedEvent>,
    pending: usize,
    active: Vec<usize>,
    truth: GroundTruth,
}

impl RenderStream {
    pub fn new(scenario: &Scenario) -> Result<Self, SynthError> {
        scenario.validate()?;
        let fs = f64::from(scenario.fs);
        let len = scenario.sample_count();

        let mut events: Vec<PreparedEvent> = scenario
            .events
            .iter()
            .map(|ev| prepare_event(ev, scenario.seed, fs, len))
            .collect();
        events.sort_by_key(|e| e.start);
        let channel_gains = events
            .iter()
            .map(|e| std::array::from_fn(|ch| scenario.channels[ch].event_gain.for_class(e.class)))
            .collect();

        let truth = GroundTruth {
            events: scenario
                .events
                .iter()
                .map(|ev| truth_for(ev, scenario.duration_s))
                .collect(),
        };

        Ok(Self {
            fs,
            len,
            next: 0,
            pink: (0..CHANNELS)
                .map(|ch| PinkNoise::new(mix64(scenario.seed ^ mix64(0x5EED_0000 + ch as u64)), fs))
                .collect(),
            noise_rms: std::array::from_fn(|ch| scenario.channels[ch].noise_uv_rms),
            mains: std::array::from_fn(|ch| {
                let c = &scenario.channels[ch];
                (f64::from(c.mains_hz), c.mains_uv)
            }),
            channel_gains,
            events,
            pending: 0,
            active: Vec::new(),
            truth,
        })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn remaining(&self) -> usize {
        self.len - self.next
    }
}

impl Iterator for RenderStream {
    type Item = [f64; CHANNELS];

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.len {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let t = i as f64 / self.fs;

        while self.pending < self.events.len() && self.events[self.pending].start <= i {
            self.active.push(self.pending);
            self.pending += 1;
        }
        let events = &self.events;
        self.active
            .retain(|&e| events[e].start + events[e].samples.len() > i);

        let mut frame = [0.0; CHANNELS];
        for &e in &self.active {
            let value = self.events[e].samples[i - self.events[e].start];
            let gains = &self.channel_gains[e];
            for (out, g) in frame.iter_mut().zip(gains) {
                *out += g * value;
            }
        }
        for (ch, out) in frame.iter_mut().enumerate() {
            // always draw so each channel's noise sequence is independent of its level
            let pink = self.pink[ch].next_sample();
            *out += self.noise_rms[ch] * pink;
            let (hz, uv) = self.mains[ch];
            if uv > 0.0 && hz > 0.0 {
                *out += uv * (2.0 * PI * hz * t).sin();
            }
        }
        Some(frame)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining();
        (n, Some(n))
    }
}

impl ExactSizeIterator for RenderStream {}

fn event_seed(scenario_seed: u64, ev: &Event) -> u64 {
    let class = ev.kind.class() as u64;
    mix64(scenario_seed ^ mix64(class) ^ mix64(ev.start_s.to_bits()) ^ mix64(ev.length_s.to_bits().rotate_left(17)))
}

fn taper(tau: f64, length: f64, ramp: f64) -> f64 {
    let ramp = ramp.min(length / 2.0);
    if tau < ramp {
        0.5 * (1.0 - (PI * tau / ramp).cos())
    } else if tau > length - ramp {
        0.5 * (1.0 - (PI * (length - tau).max(0.0) / ramp).cos())
    } else {
        1.0
    }
}

fn ecg_beats(bpm: f64, length: f64) -> (f64, Vec<f64>) {
    let rr = 60.0 / bpm;
    let offset = 0.3 * rr.sqrt();
    let beats = (0..)
        .map(|k| offset + k as f64 * rr)
        .take_while(|&t| t < length)
        .collect();
    (rr, beats)
}

fn prepare_event(ev: &Event, scenario_seed: u64, fs: f64, total: usize) -> PreparedEvent {
    let start = (ev.start_s * fs).ceil() as usize;
    let end = ((ev.end_s() * fs).ceil() as usize).min(total);
    let n = end.saturating_sub(start);
    let amp = ev.amplitude_uv;
    let tau = |k: usize| (start + k) as f64 / fs - ev.start_s;
    let seed = event_seed(scenario_seed, ev);

    let samples: Vec<f64> = match ev.kind {
        EventKind::AlphaInterval { freq_hz } => (0..n)
            .map(|k| {
                let t = (start + k) as f64 / fs;
                amp * (2.0 * PI * freq_hz * t).sin() * taper(tau(k), ev.length_s, ALPHA_RAMP_S)
            })
            .collect(),
        EventKind::Blink => (0..n)
            .map(|k| amp * 0.5 * (1.0 - (2.0 * PI * tau(k) / ev.length_s).cos()))
            .collect(),
        EventKind::Chew { modulation_hz } => {
            let carrier = band_noise(seed, fs, CHEW_BAND_HZ.0, CHEW_BAND_HZ.1, n);
            carrier
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let m = 1.0 - CHEW_MODULATION_DEPTH
                        + CHEW_MODULATION_DEPTH * (2.0 * PI * modulation_hz * tau(k)).sin();
                    amp * c * m * taper(tau(k), ev.length_s, BURST_RAMP_S)
                })
                .collect()
        }
        EventKind::EmgBurst => {
            let carrier = band_noise(seed, fs, EMG_BAND_HZ.0, EMG_BAND_HZ.1, n);
            carrier
                .iter()
                .enumerate()
                .map(|(k, c)| amp * c * taper(tau(k), ev.length_s, BURST_RAMP_S))
                .collect()
        }
        EventKind::EcgRun { bpm } => {
            let (rr, beats) = ecg_beats(bpm, ev.length_s);
            let stretch = rr.sqrt();
            (0..n)
                .map(|k| {
                    let t = tau(k);
                    beats
                        .iter()
                        .filter(|&&r| (t - r).abs() < 1.0)
                        .map(|&r| {
                            PQRST
                                .iter()
                                .map(|&(centre, sigma, rel, stretches)| {
                                    let c = if stretches { centre * stretch } else { centre };
                                    let d = t - r - c;
                                    rel * (-(d * d) / (2.0 * sigma * sigma)).exp()
                                })
                                .sum::<f64>()
                        })
                        .sum::<f64>()
                        * amp
                })
                .collect()
        }
    };
    PreparedEvent {
        start,
        samples,
        class: ev.kind.class(),
    }
}

fn truth_for(ev: &Event, duration: f64) -> TruthEvent {
    let end = ev.end_s().min(duration);
    let markers_s = match ev.kind {
        EventKind::AlphaInterval { .. } => Vec::new(),
        EventKind::Blink => {
            let apex = ev.start_s + ev.length_s / 2.0;
            if apex < duration {
                vec![apex]
            } else {
                Vec::new()
            }
        }
        EventKind::Chew { .. } | EventKind::EmgBurst => vec![ev.start_s],
        EventKind::EcgRun { bpm } => ecg_beats(bpm, ev.length_s)
            .1
            .into_iter()
            .map(|t| ev.start_s + t)
            .filter(|&t| t < end)
            .collect(),
    };
    TruthEvent {
        class: ev.kind.class(),
        start_s: ev.start_s,
        end_s: end,
        markers_s,
    }
}
