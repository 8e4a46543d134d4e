use peeg_dsp::{detect_r_peaks, score_alpha, DetectorConfig, EyeState, ProtocolSegment};
use serde_json::Value;

#[test]
fn alpha_report_fields() {
    let fs = 250.0;
    let x: Vec<f64> = (0..2500)
        .map(|i| {
            let t = i as f64 / fs;
            let a = if t < 5.0 { 20.0 } else { 2.0 };
            a * (2.0 * std::f64::consts::PI * 10.0 * t).sin()
        })
        .collect();
    let protocol = [
        ProtocolSegment {
            start_s: 0.0,
            end_s: 5.0,
            expected: EyeState::Closed,
        },
        ProtocolSegment {
            start_s: 5.0,
            end_s: 10.0,
            expected: EyeState::Open,
        },
    ];
    let report = score_alpha(&x, fs, &protocol, &DetectorConfig::default().alpha).unwrap();
    let v: Value = serde_json::to_value(&report).unwrap();
    assert_eq!(v["segments"][0]["label"], "closed");
    assert_eq!(v["segments"][1]["label"], "open");
    assert_eq!(v["sequence_match"], 1.0);
    let ratio = v["ratio"].as_f64().unwrap();
    assert!((ratio - 100.0).abs() < 1.0, "{ratio}");
}

#[test]
fn absent_heart_rate_serializes_as_null() {
    let report = detect_r_peaks(&[0.0; 2000], 250.0, &DetectorConfig::default().ecg).unwrap();
    let v: Value = serde_json::to_value(&report).unwrap();
    assert_eq!(v["mean_hr"], Value::Null);
    assert_eq!(v["peaks"]["kind"], "r_peak");
    assert_eq!(v["peaks"]["times_s"], Value::Array(vec![]));
}

#[test]
fn config_round_trips_and_fills_defaults() {
    let cfg = DetectorConfig::default();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<DetectorConfig>(&text).unwrap(), cfg);
    let partial: DetectorConfig = serde_json::from_str(r#"{"blink": {"mad_factor": 8.0}}"#).unwrap();
    assert_eq!(partial.blink.mad_factor, 8.0);
    assert_eq!(partial.blink.refractory_s, cfg.blink.refractory_s);
    assert_eq!(partial.ecg, cfg.ecg);
}
