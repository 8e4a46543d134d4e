#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_stream::Decoder;

fuzz_target!(|data: &[u8]| {
    // The first byte picks the chunk size so frames straddle pushes.
    let Some((&step, rest)) = data.split_first() else {
        return;
    };
    let mut dec = Decoder::new();
    for chunk in rest.chunks(usize::from(step).max(1)) {
        dec.push(chunk);
        while let Some(item) = dec.next_message() {
            if let Err(e) = item {
                if e.is_fatal() {
                    assert!(dec.has_failed());
                    dec.push(b"PEEG");
                    assert!(dec.next_message().is_none(), "decoder spoke after a fatal error");
                    return;
                }
            }
        }
    }
});
