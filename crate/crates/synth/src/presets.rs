//! Canonical scenarios mirroring the kit's validation recordings.

use crate::scenario::{ChannelPlan, Event, EventGains, EventKind, Scenario, DEFAULT_LABELS};

pub const DEFAULT_NOISE_UV: f64 = 10.0;
pub const DEFAULT_MAINS_HZ: u32 = 50;
pub const DEFAULT_MAINS_UV: f64 = 5.0;

pub const ALPHA_HZ: f64 = 10.0;
pub const ALPHA_UV: f64 = 20.0;
pub const BLINK_LENGTH_S: f64 = 0.3;
pub const BLINK_UV: f64 = 120.0;
pub const CHEW_LENGTH_S: f64 = 0.5;
pub const CHEW_UV: f64 = 80.0;
pub const CHEW_MODULATION_HZ: f64 = 6.0;
pub const GROUP_GAP_S: f64 = 2.5;

/// How strongly each event class shows up on each default electrode.
/// Frontal sites carry blinks, posterior sites carry more alpha.
const DEFAULT_GAINS: [EventGains; 8] = [
    gains(1.0, 1.0, 1.0, 1.0, 0.05),
    gains(1.0, 0.4, 0.7, 0.0, 0.05),
    gains(1.3, 0.15, 0.5, 0.0, 0.05),
    gains(1.5, 0.05, 0.4, 0.0, 0.05),
    gains(0.8, 0.2, 0.9, 0.0, 0.05),
    gains(0.8, 0.2, 0.9, 0.0, 0.05),
    gains(1.5, 0.05, 0.4, 0.0, 0.05),
    gains(1.5, 0.05, 0.4, 0.0, 0.05),
];

const fn gains(alpha: f64, blink: f64, chew: f64, emg: f64, ecg: f64) -> EventGains {
    EventGains {
        alpha,
        blink,
        chew,
        emg,
        ecg,
    }
}

fn default_channels(first_label: &str, noise: f64) -> Vec<ChannelPlan> {
    DEFAULT_LABELS
        .iter()
        .zip(DEFAULT_GAINS)
        .enumerate()
        .map(|(i, (label, g))| {
            let label = if i == 0 { first_label } else { label };
            ChannelPlan::new(label, noise, g).with_mains(DEFAULT_MAINS_HZ, DEFAULT_MAINS_UV)
        })
        .collect()
}

fn base(name: &str, duration_s: f64, seed: u64, first_label: &str, noise: f64) -> Scenario {
    let mut s = Scenario::new(duration_s, 250, seed, noise);
    s.name = name.to_string();
    s.channels = default_channels(first_label, noise);
    s
}

/// 30 s alpha protocol: eyes closed for 5 s, open for 5 s, three times.
pub fn fig6_scenario() -> Scenario {
    let mut s = base("fig6", 30.0, 6, "Fz", DEFAULT_NOISE_UV);
    for start in [0.0, 10.0, 20.0] {
        s.events.push(Event::new(
            EventKind::AlphaInterval { freq_hz: ALPHA_HZ },
            start,
            5.0,
            ALPHA_UV,
        ));
    }
    s
}

/// The eyes-closed/eyes-open schedule of [`fig6_scenario`] as `(start, end, closed)`.
pub fn fig6_protocol() -> Vec<(f64, f64, bool)> {
    (0..6)
        .map(|k| (k as f64 * 5.0, (k + 1) as f64 * 5.0, k % 2 == 0))
        .collect()
}

/// Chewing in groups of 4, 3, 2, 1 followed by blinking in groups of 4, 3, 2.
pub fn fig7_scenario() -> Scenario {
    let mut s = base("fig7", 0.0, 7, "Fz", DEFAULT_NOISE_UV);
    let mut cursor = 1.0;
    for group in [4, 3, 2, 1] {
        for i in 0..group {
            s.events.push(Event::new(
                EventKind::Chew {
                    modulation_hz: CHEW_MODULATION_HZ,
                },
                cursor + i as f64,
                CHEW_LENGTH_S,
                CHEW_UV,
            ));
        }
        cursor += (group - 1) as f64 + CHEW_LENGTH_S + GROUP_GAP_S;
    }
    let blink_spacing = 0.8;
    for group in [4, 3, 2] {
        for i in 0..group {
            s.events.push(Event::new(
                EventKind::Blink,
                cursor + i as f64 * blink_spacing,
                BLINK_LENGTH_S,
                BLINK_UV,
            ));
        }
        cursor += (group - 1) as f64 * blink_spacing + BLINK_LENGTH_S + GROUP_GAP_S;
    }
    s.duration_s = (cursor + 1.0).ceil();
    s
}

/// Five fist-clench EMG bursts of 1.5 s on a surface EMG channel.
pub fn fig8_scenario() -> Scenario {
    let mut s = base("fig8", 20.0, 8, "EMG", 5.0);
    for k in 0..5 {
        s.events.push(Event::new(
            EventKind::EmgBurst,
            2.0 + 3.5 * k as f64,
            1.5,
            60.0,
        ));
    }
    s
}

/// 30 s of ECG at `bpm` on a surface ECG channel.
pub fn ecg_scenario(bpm: f64) -> Scenario {
    let mut s = base(&format!("ecg{bpm}"), 30.0, 9, "ECG", DEFAULT_NOISE_UV);
    s.channels[0].event_gain.ecg = 1.0;
    s.events
        .push(Event::new(EventKind::EcgRun { bpm }, 0.0, 30.0, 1000.0));
    s
}

pub fn fig9_scenario() -> Scenario {
    let mut s = ecg_scenario(60.0);
    s.name = "fig9".into();
    s
}

/// Resolves a scenario shortcut: `fig6`, `fig7`, `fig8`, `fig9`, or `ecg:<bpm>`.
pub fn named_scenario(name: &str) -> Option<Scenario> {
    match name {
        "fig6" => Some(fig6_scenario()),
        "fig7" => Some(fig7_scenario()),
        "fig8" => Some(fig8_scenario()),
        "fig9" => Some(fig9_scenario()),
        _ => {
            let bpm: f64 = name.strip_prefix("ecg:")?.parse().ok()?;
            let s = ecg_scenario(bpm);
            s.validate().ok()?;
            Some(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::EventClass;

    fn count(s: &Scenario, class: EventClass) -> usize {
        s.events.iter().filter(|e| e.kind.class() == class).count()
    }

    #[test]
    fn fig6_shape() {
        let s = fig6_scenario();
        s.validate().unwrap();
        assert_eq!(s.fs, 250);
        assert_eq!(s.duration_s, 30.0);
        assert_eq!(count(&s, EventClass::Alpha), 3);
        for ev in &s.events {
            assert_eq!(ev.length_s, 5.0);
            match ev.kind {
                EventKind::AlphaInterval { freq_hz } => assert!((8.0..=12.0).contains(&freq_hz)),
                _ => panic!("unexpected event"),
            }
        }
        let starts: Vec<f64> = s.events.iter().map(|e| e.start_s).collect();
        assert_eq!(starts, vec![0.0, 10.0, 20.0]);
    }

    #[test]
    fn fig7_shape() {
        let s = fig7_scenario();
        s.validate().unwrap();
        assert_eq!(count(&s, EventClass::Chew), 10);
        assert_eq!(count(&s, EventClass::Blink), 9);
        let blink = s.events.iter().find(|e| e.kind == EventKind::Blink).unwrap();
        assert_eq!(blink.length_s, 0.3);
        assert_eq!(blink.amplitude_uv, 120.0);

        // groups separated by at least 2 s of quiet
        let mut evs = s.events.clone();
        evs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        let mut groups = vec![1usize];
        for pair in evs.windows(2) {
            let gap = pair[1].start_s - pair[0].end_s();
            if gap >= 2.0 {
                groups.push(1);
            } else {
                assert!(pair[0].kind.class() == pair[1].kind.class());
                *groups.last_mut().unwrap() += 1;
            }
        }
        assert_eq!(groups, vec![4, 3, 2, 1, 4, 3, 2]);
        assert!(evs.last().unwrap().end_s() < s.duration_s);
    }

    #[test]
    fn named() {
        assert_eq!(named_scenario("fig6").unwrap(), fig6_scenario());
        assert!(named_scenario("ecg:120").is_some());
        assert!(named_scenario("ecg:500").is_none());
        assert!(named_scenario("fig5").is_none());
    }
}
