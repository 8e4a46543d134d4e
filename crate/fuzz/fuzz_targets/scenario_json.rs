#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_synth::Scenario;

fuzz_target!(|data: &str| {
    if let Ok(s) = Scenario::from_json(data) {
        s.validate().expect("from_json validates");
        let again = Scenario::from_json(&s.to_json()).expect("serialized scenarios parse");
        assert_eq!(again.to_json(), s.to_json());
    }
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(data) {
        let _ = peeg_stream::parse_scenario(&v);
    }
});
