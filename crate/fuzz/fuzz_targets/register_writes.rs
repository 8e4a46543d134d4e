#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_ads1299::{RegisterFile, CHANNELS, DEVICE_ID, REGISTER_COUNT};

fuzz_target!(|data: &[u8]| {
    if let Ok(dump) = <[u8; REGISTER_COUNT]>::try_from(data.get(..REGISTER_COUNT).unwrap_or(&[])) {
        if let Ok(rf) = RegisterFile::from_bytes(dump) {
            // A bank accepted from a dump reproduces it.
            assert_eq!(RegisterFile::from_bytes(*rf.as_bytes()).as_ref(), Ok(&rf));
        }
    }
    let mut rf = RegisterFile::default();
    for pair in data.chunks_exact(2) {
        let before = rf.clone();
        match rf.clone().write_register(pair[0], pair[1]) {
            Ok(next) => {
                assert_eq!(next.read_register(pair[0]).is_ok(), true);
                rf = next;
            }
            Err(_) => assert_eq!(rf, before, "a refused write changed the bank"),
        }
        assert_eq!(rf.id(), DEVICE_ID);
        assert!([250, 500, 1000, 2000, 4000, 8000, 16000].contains(&rf.sample_rate()));
        for ch in 0..CHANNELS {
            assert!([1, 2, 4, 6, 8, 12, 24].contains(&rf.gain_of(ch).value()));
        }
    }
});
