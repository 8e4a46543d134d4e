#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_dsp::DetectorConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<DetectorConfig>(data) {
        let text = serde_json::to_string(&cfg).expect("configs serialize");
        let _: DetectorConfig = serde_json::from_str(&text).expect("serialized configs parse");
    }
});
