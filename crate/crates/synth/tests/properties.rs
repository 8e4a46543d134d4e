use peeg_synth::{
    fig7_scenario, render, Event, EventClass, EventKind, Scenario, GroundTruth,
};
use proptest::prelude::*;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn event_strategy() -> impl Strategy<Value = Event> {
    let kind = prop_oneof![
        (8.0..12.0f64).prop_map(|f| EventKind::AlphaInterval { freq_hz: f }),
        Just(EventKind::Blink),
        (4.0..8.0f64).prop_map(|m| EventKind::Chew { modulation_hz: m }),
        Just(EventKind::EmgBurst),
        (30.0..240.0f64).prop_map(|bpm| EventKind::EcgRun { bpm }),
    ];
    (kind, 0.0..9.5f64, 0.1..4.0f64, 0.0..200.0f64)
        .prop_map(|(kind, start, len, amp)| Event::new(kind, start, len, amp))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn composition_is_linear(a in event_strategy(), b in event_strategy(), seed in any::<u64>()) {
        let base = Scenario::new(10.0, 250, seed, 8.0);
        let none = render(&base).unwrap();
        let only_a = render(&base.clone().with_event(a)).unwrap();
        let only_b = render(&base.clone().with_event(b)).unwrap();
        let both = render(&base.clone().with_event(a).with_event(b)).unwrap();
        for ch in 0..8 {
            for i in 0..both.len() {
                let lhs = both.channels[ch][i] + none.channels[ch][i];
                let rhs = only_a.channels[ch][i] + only_b.channels[ch][i];
                prop_assert!((lhs - rhs).abs() < 1e-9, "ch {ch} i {i}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn truth_is_consistent(events in proptest::collection::vec(event_strategy(), 0..12)) {
        let mut s = Scenario::new(10.0, 250, 1, 0.0);
        s.events = events.clone();
        let r = render(&s).unwrap();
        prop_assert_eq!(r.truth.events.len(), events.len());
        for class in [EventClass::Alpha, EventClass::Blink, EventClass::Chew, EventClass::EmgBurst, EventClass::EcgRun] {
            let want = events.iter().filter(|e| e.kind.class() == class).count();
            prop_assert_eq!(r.truth.count(class), want);
        }
        for ev in &r.truth.events {
            prop_assert!(ev.start_s >= 0.0 && ev.start_s < 10.0);
            prop_assert!(ev.end_s <= 10.0);
            for &m in &ev.markers_s {
                prop_assert!((0.0..10.0).contains(&m));
            }
        }
    }
}

#[test]
fn noise_rms_is_calibrated() {
    for seed in 0..8u64 {
        for &(fs, level) in &[(250u32, 10.0), (250, 3.0), (1000, 5.0)] {
            let s = Scenario::new(20.0, fs, seed, level);
            let r = render(&s).unwrap();
            for ch in 0..8 {
                let measured = rms(r.channel(ch));
                assert!(
                    (measured - level).abs() <= 0.1 * level,
                    "seed {seed} fs {fs} ch {ch}: rms {measured} vs {level}"
                );
            }
        }
    }
}

#[test]
fn fig7_truth_counts() {
    let r = render(&fig7_scenario()).unwrap();
    let truth: &GroundTruth = &r.truth;
    assert_eq!(truth.blink_apexes().len(), 9);
    assert_eq!(truth.chew_onsets().len(), 10);
}

#[test]
fn render_is_bit_identical_across_runs() {
    let s = Scenario::new(12.0, 500, 99, 4.0)
        .with_event(Event::new(EventKind::EmgBurst, 1.0, 2.0, 50.0))
        .with_event(Event::new(EventKind::Chew { modulation_hz: 6.0 }, 5.0, 0.5, 80.0));
    let a = render(&s).unwrap();
    let b = render(&s).unwrap();
    for ch in 0..8 {
        let bits_a: Vec<u64> = a.channel(ch).iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = b.channel(ch).iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }
}
