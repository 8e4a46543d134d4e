#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_acquisition::HardwareConfig;

fuzz_target!(|data: &str| {
    let _ = HardwareConfig::from_toml(data);
});
