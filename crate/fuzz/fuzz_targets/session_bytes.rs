#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_session::{read_session_bytes, SessionError, SessionWriter};

fuzz_target!(|data: &[u8]| {
    let session = match read_session_bytes(data) {
        Ok(s) => s,
        Err(SessionError::Truncated { recovered }) => {
            assert!(recovered.footer.is_none());
            *recovered
        }
        Err(_) => return,
    };
    // Anything the reader accepts can be written back and read identically.
    let mut w = SessionWriter::new(Vec::new(), session.header.clone()).expect("accepted header");
    for b in &session.blocks {
        w.write_block(b).expect("accepted block");
    }
    for a in &session.annotations {
        w.annotate(a.time_s, &a.text).expect("accepted annotation");
    }
    let bytes = w.finish().unwrap();
    let back = read_session_bytes(&bytes).expect("rewritten session reads");
    assert_eq!(back.blocks.len(), session.blocks.len());
    let notes = |s: &peeg_session::Session| -> Vec<(u64, String)> {
        s.annotations.iter().map(|a| (a.time_s.to_bits(), a.text.clone())).collect()
    };
    assert_eq!(notes(&back), notes(&session));
    for (a, b) in back.blocks.iter().zip(&session.blocks) {
        assert_eq!((a.seq, &a.codes, a.gains), (b.seq, &b.codes, b.gains));
    }
});
