#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_stream::{decode_body, decode_message, encode};

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = decode_message(data) {
        // Decoded messages re-encode to bytes that decode to the same encoding.
        let again = encode(&msg).expect("decoded messages encode");
        let back = decode_message(&again).expect("re-encoded messages decode");
        assert_eq!(encode(&back).unwrap(), again);
    }
    if let Some((&ty, body)) = data.split_first() {
        let _ = decode_body(ty, body);
    }
});
