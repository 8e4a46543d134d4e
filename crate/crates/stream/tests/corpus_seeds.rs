//! The checked-in fuzz seeds must stay valid, or fuzzing starts from noise.

use std::path::PathBuf;

use peeg_stream::{decode_message, Message};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn message_seeds_decode() {
    let all = seeds("stream_message");
    assert!(all.len() >= 14);
    for (name, bytes) in all {
        let msg = decode_message(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        let kind = match msg {
            Message::Hello(_) => "hello",
            Message::Data(_) => "data",
            Message::Metrics(_) => "metrics",
            Message::Cmd(_) => "cmd",
            Message::Ack(_) => "ack",
            Message::Err(_) => "err",
        };
        assert!(name.starts_with(kind), "{name} decoded as {kind}");
    }
}
