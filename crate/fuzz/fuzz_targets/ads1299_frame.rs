#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_ads1299::{decode_frame, decode_frame_with, encode_frame, SyncCheck, FRAME_LEN};

fuzz_target!(|data: &[u8]| {
    let checked = decode_frame(data);
    match decode_frame_with(data, SyncCheck::Disabled) {
        Ok(frame) => {
            // Every 27-byte input decodes without the sync check and re-encodes to itself.
            assert_eq!(data.len(), FRAME_LEN);
            assert_eq!(&encode_frame(&frame).unwrap()[..], data);
            if let Ok(f) = checked {
                assert_eq!(f, frame);
            }
        }
        Err(_) => {
            assert_ne!(data.len(), FRAME_LEN);
            assert!(checked.is_err());
        }
    }
});
