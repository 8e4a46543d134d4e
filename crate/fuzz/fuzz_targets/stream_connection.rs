#![no_main]

use std::sync::Arc;

use libfuzzer_sys::fuzz_target;
use peeg_stream::{
    CmdError, Connection, Control, ErrorCode, Flow, Hello, Message, Outbound, ServerHello, PROTOCOL_VERSION,
};
use serde_json::Value;

struct Fixed;

impl Control for Fixed {
    fn hello(&self, client_id: u64, authenticated: bool) -> ServerHello {
        ServerHello {
            server: "fuzz".into(),
            protocol: PROTOCOL_VERSION,
            client_id,
            fs: 250,
            channels: vec!["Fz".into(); 8],
            gains: vec![24; 8],
            block_len: 25,
            backend: "simulator".into(),
            state: "running".into(),
            epoch: 0,
            auth_required: true,
            authenticated,
            default_credit: 64,
        }
    }
    fn check_token(&self, token: Option<&str>) -> Option<bool> {
        Some(token == Some("tok"))
    }
    fn start(&self) -> Result<Option<String>, CmdError> {
        Ok(None)
    }
    fn stop(&self) -> Result<(), CmdError> {
        Ok(())
    }
    fn read_register(&self, addr: u8) -> Result<u8, CmdError> {
        Ok(addr)
    }
    fn write_register(&self, addr: u8, _: u8) -> Result<u32, CmdError> {
        if addr == 0 {
            Err(CmdError::new(ErrorCode::InvalidReg, "read-only"))
        } else {
            Ok(1)
        }
    }
    fn annotate(&self, _: Option<f64>, _: &str) -> Result<Option<String>, CmdError> {
        Ok(None)
    }
    fn set_scenario(&self, _: &Value) -> Result<(), CmdError> {
        Err(CmdError::new(ErrorCode::Unsupported, "no"))
    }
}

fuzz_target!(|data: &[u8]| {
    // First byte: authenticated flag and chunk size.
    let Some((&ctl, rest)) = data.split_first() else {
        return;
    };
    let mut conn = Connection::new(1, Arc::new(Flow::new(ctl & 1 == 1)));
    for chunk in rest.chunks(usize::from(ctl >> 1).max(1)) {
        let out = conn.on_bytes(chunk, &Fixed);
        for (i, o) in out.iter().enumerate() {
            match o {
                Outbound::Send(Message::Err(_) | Message::Ack(_) | Message::Hello(Hello::Server(_))) => {}
                Outbound::Close => assert_eq!(i, out.len() - 1, "close must come last"),
                other => panic!("connection emitted {other:?}"),
            }
        }
        if conn.is_closed() {
            assert!(conn.on_bytes(b"PEEG", &Fixed).is_empty());
            return;
        }
    }
});
