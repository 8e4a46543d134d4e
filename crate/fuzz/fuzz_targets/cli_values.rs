#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_cli::{parse_byte, parse_register};

fuzz_target!(|data: &str| {
    if let Ok(v) = parse_byte(data) {
        assert_eq!(parse_byte(&format!("{v:#04x}")).ok(), Some(v));
    }
    let _ = parse_register(data);
});
