//! Detectors against simulator ground truth.

use peeg_dsp::{
    detect_blinks, detect_chews, detect_r_peaks, emg_onsets, score_alpha, DetectorConfig,
    EyeState, ProtocolSegment,
};
use peeg_synth::{
    ecg_scenario, fig6_protocol, fig6_scenario, fig7_scenario, fig8_scenario, render, Event,
    EventKind, Scenario,
};

fn protocol() -> Vec<ProtocolSegment> {
    fig6_protocol()
        .into_iter()
        .map(|(start_s, end_s, closed)| ProtocolSegment {
            start_s,
            end_s,
            expected: if closed { EyeState::Closed } else { EyeState::Open },
        })
        .collect()
}

/// Greedy one-to-one matching; returns the number of detections within `tol` of a truth time.
fn matched(truth: &[f64], found: &[f64], tol: f64) -> usize {
    let mut used = vec![false; found.len()];
    let mut hits = 0;
    for t in truth {
        if let Some(j) = (0..found.len())
            .filter(|&j| !used[j] && (found[j] - t).abs() <= tol)
            .min_by(|&a, &b| (found[a] - t).abs().total_cmp(&(found[b] - t).abs()))
        {
            used[j] = true;
            hits += 1;
        }
    }
    hits
}

#[test]
fn alpha_protocol_separates_states() {
    let cfg = DetectorConfig::default();
    let mut passing = 0;
    for seed in 0..20 {
        let r = render(&fig6_scenario().with_seed(seed)).unwrap();
        let report = score_alpha(r.channel(0), f64::from(r.fs), &protocol(), &cfg.alpha).unwrap();
        let ratio = report.ratio.unwrap();
        if report.sequence_match >= 0.9 && ratio >= 2.0 {
            passing += 1;
        }
        eprintln!("seed {seed}: match {} ratio {ratio:.2}", report.sequence_match);
    }
    assert!(passing >= 18, "{passing}/20");
}

#[test]
fn alpha_on_noise_is_near_unity() {
    let cfg = DetectorConfig::default();
    let mut matches = Vec::new();
    for seed in 0..40 {
        let mut s = fig6_scenario().with_seed(1000 + seed);
        s.events.clear();
        let r = render(&s).unwrap();
        let report = score_alpha(r.channel(0), f64::from(r.fs), &protocol(), &cfg.alpha).unwrap();
        let ratio = report.ratio.unwrap();
        assert!((0.5..=2.0).contains(&ratio), "seed {seed}: {ratio}");
        matches.push(report.sequence_match);
    }
    let mean = matches.iter().sum::<f64>() / matches.len() as f64;
    assert!((0.3..=0.7).contains(&mean), "mean match {mean}");
}

#[test]
fn fig7_blinks_and_chews() {
    let cfg = DetectorConfig::default();
    let mut exact = 0;
    for seed in 0..20 {
        let r = render(&fig7_scenario().with_seed(seed)).unwrap();
        let x = r.channel(0);
        let blinks = detect_blinks(x, f64::from(r.fs), &cfg.blink).unwrap();
        let chews = detect_chews(x, f64::from(r.fs), &cfg.chew).unwrap();
        let truth_blinks = r.truth.blink_apexes();
        let truth_chews = r.truth.chew_onsets();
        let blink_hits = matched(&truth_blinks, &blinks.times_s, 0.05);
        let chew_hits = matched(&truth_chews, &chews.times_s, 0.25);
        eprintln!(
            "seed {seed}: blinks {}/{} hit {blink_hits}, chews {}/{} hit {chew_hits}",
            blinks.len(),
            truth_blinks.len(),
            chews.len(),
            truth_chews.len()
        );
        if blinks.len() == 9 && blink_hits == 9 && chews.len() == 10 && chew_hits == 10 {
            exact += 1;
        }
    }
    assert!(exact >= 18, "{exact}/20");
}

#[test]
fn fig8_emg_onsets() {
    let cfg = DetectorConfig::default();
    for seed in 0..10 {
        let r = render(&fig8_scenario().with_seed(seed)).unwrap();
        let report = emg_onsets(r.channel(0), f64::from(r.fs), &cfg.emg).unwrap();
        let truth = r.truth.emg_onsets();
        eprintln!("seed {seed}: {:?} vs {truth:?}", report.onsets.times_s);
        assert_eq!(report.onsets.len(), 5);
        assert_eq!(matched(&truth, &report.onsets.times_s, 0.1), 5);
    }
}

#[test]
fn ecg_heart_rate() {
    let cfg = DetectorConfig::default();
    for (bpm, tol) in [(60.0, 1.0), (90.0, 1.5), (120.0, 2.0)] {
        for seed in 0..5 {
            let r = render(&ecg_scenario(bpm).with_seed(seed)).unwrap();
            let report = detect_r_peaks(r.channel(0), f64::from(r.fs), &cfg.ecg).unwrap();
            let hr = report.mean_hr.unwrap();
            let truth = r.truth.r_peaks();
            eprintln!("{bpm} seed {seed}: {} peaks hr {hr:.2}", report.peaks.len());
            assert!((hr - bpm).abs() <= tol, "{bpm}: {hr}");
            assert!(report.peaks.len().abs_diff(truth.len()) <= 1);
            assert!(matched(&truth, &report.peaks.times_s, 0.02) + 1 >= truth.len());
        }
    }
}

#[test]
fn blink_false_positives_on_noise() {
    let cfg = DetectorConfig::default();
    let mut clean = 0;
    for seed in 0..100 {
        let mut s = fig7_scenario().with_seed(5000 + seed);
        s.events.clear();
        let r = render(&s).unwrap();
        if detect_blinks(r.channel(0), f64::from(r.fs), &cfg.blink).unwrap().is_empty() {
            clean += 1;
        }
    }
    assert!(clean >= 95, "{clean}/100");
}

#[test]
fn blinks_do_not_register_as_chews() {
    let cfg = DetectorConfig::default();
    for seed in 0..10 {
        let mut s = fig7_scenario().with_seed(seed);
        s.events.retain(|e| matches!(e.kind, EventKind::Blink));
        let r = render(&s).unwrap();
        assert_eq!(detect_chews(r.channel(0), f64::from(r.fs), &cfg.chew).unwrap().len(), 0);
    }
}

#[test]
fn tonic_contraction_has_one_onset() {
    let s = {
        let mut s = fig8_scenario();
        s.events.clear();
        s.with_event(Event::new(EventKind::EmgBurst, 6.0, 14.0, 60.0))
    };
    let r = render(&s).unwrap();
    let report = emg_onsets(r.channel(0), f64::from(r.fs), &DetectorConfig::default().emg).unwrap();
    assert_eq!(report.onsets.len(), 1);
    assert!((report.onsets.times_s[0] - 6.0).abs() <= 0.1);
}

#[test]
fn flat_inputs_yield_nothing() {
    let cfg = DetectorConfig::default();
    let x = vec![0.0; 2500];
    assert!(detect_blinks(&x, 250.0, &cfg.blink).unwrap().is_empty());
    assert!(detect_chews(&x, 250.0, &cfg.chew).unwrap().is_empty());
    assert!(emg_onsets(&x, 250.0, &cfg.emg).unwrap().onsets.is_empty());
    let ecg = detect_r_peaks(&x, 250.0, &cfg.ecg).unwrap();
    assert!(ecg.peaks.is_empty());
    assert!(ecg.mean_hr.is_none());
}

fn scaled(s: &Scenario, c: f64) -> Vec<f64> {
    render(s).unwrap().channel(0).iter().map(|v| v * c).collect()
}

#[test]
fn detectors_are_scale_covariant() {
    let cfg = DetectorConfig::default();
    let fig7 = fig7_scenario();
    let ecg = ecg_scenario(75.0);
    let fig8 = fig8_scenario();
    let base_b = detect_blinks(&scaled(&fig7, 1.0), 250.0, &cfg.blink).unwrap();
    let base_c = detect_chews(&scaled(&fig7, 1.0), 250.0, &cfg.chew).unwrap();
    let base_e = emg_onsets(&scaled(&fig8, 1.0), 250.0, &cfg.emg).unwrap().onsets;
    let base_r = detect_r_peaks(&scaled(&ecg, 1.0), 250.0, &cfg.ecg).unwrap().peaks;
    for c in [0.01, 0.5, 3.0, 250.0] {
        let b = detect_blinks(&scaled(&fig7, c), 250.0, &cfg.blink).unwrap();
        assert_eq!(b.times_s, base_b.times_s, "blinks at scale {c}");
        let ch = detect_chews(&scaled(&fig7, c), 250.0, &cfg.chew).unwrap();
        assert_eq!(ch.times_s, base_c.times_s, "chews at scale {c}");
        let e = emg_onsets(&scaled(&fig8, c), 250.0, &cfg.emg).unwrap().onsets;
        assert_eq!(e.times_s, base_e.times_s, "emg at scale {c}");
        let r = detect_r_peaks(&scaled(&ecg, c), 250.0, &cfg.ecg).unwrap().peaks;
        assert_eq!(r.times_s, base_r.times_s, "ecg at scale {c}");
    }
}

#[test]
fn detectors_are_deterministic() {
    let cfg = DetectorConfig::default();
    let x = scaled(&fig7_scenario(), 1.0);
    assert_eq!(
        detect_blinks(&x, 250.0, &cfg.blink).unwrap(),
        detect_blinks(&x, 250.0, &cfg.blink).unwrap()
    );
    assert_eq!(
        detect_chews(&x, 250.0, &cfg.chew).unwrap(),
        detect_chews(&x, 250.0, &cfg.chew).unwrap()
    );
}
