use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use peeg_stream::{
    encode, Ack, CmdError, CmdOp, Command, Connection, Control, ErrorCode, Flow, Hello, Message, Outbound,
    ServerHello, MAGIC, PROTOCOL_VERSION,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

#[derive(Default)]
struct Mock {
    writes: AtomicU32,
}

impl Control for Mock {
    fn hello(&self, client_id: u64, authenticated: bool) -> ServerHello {
        ServerHello {
            server: "mock".into(),
            protocol: PROTOCOL_VERSION,
            client_id,
            fs: 250,
            channels: vec!["Fz".into(); 8],
            gains: vec![24; 8],
            block_len: 25,
            backend: "simulator".into(),
            state: "running".into(),
            epoch: 0,
            auth_required: false,
            authenticated,
            default_credit: 64,
        }
    }
    fn check_token(&self, token: Option<&str>) -> Option<bool> {
        token.map(|t| t == "tok")
    }
    fn start(&self) -> Result<Option<String>, CmdError> {
        Ok(None)
    }
    fn stop(&self) -> Result<(), CmdError> {
        Err(CmdError::new(ErrorCode::NotRunning, "idle"))
    }
    fn read_register(&self, addr: u8) -> Result<u8, CmdError> {
        if addr < 0x18 {
            Ok(addr)
        } else {
            Err(CmdError::new(ErrorCode::InvalidReg, "no such register"))
        }
    }
    fn write_register(&self, addr: u8, _: u8) -> Result<u32, CmdError> {
        if addr == 0 || addr >= 0x18 {
            return Err(CmdError::new(ErrorCode::InvalidReg, "read-only"));
        }
        Ok(self.writes.fetch_add(1, Ordering::SeqCst) + 1)
    }
    fn annotate(&self, _: Option<f64>, _: &str) -> Result<Option<String>, CmdError> {
        Ok(None)
    }
    fn set_scenario(&self, _: &Value) -> Result<(), CmdError> {
        Err(CmdError::new(ErrorCode::Unsupported, "no"))
    }
}

fn random_stream(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let len = rng.gen_range(0..48);
    let mut bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
    // Half the streams get a valid envelope prefix so decoding reaches the body parsers.
    if rng.gen_bool(0.5) {
        let mut env = MAGIC.to_vec();
        env.push(PROTOCOL_VERSION);
        env.push(rng.gen_range(0..8));
        let body = bytes.len() as u32 + if rng.gen_bool(0.8) { 0 } else { rng.gen_range(0..4) };
        env.extend(body.to_le_bytes());
        env.extend(bytes);
        bytes = env;
    }
    bytes
}

fn check(out: &[Outbound], conn: &Connection) {
    for (i, o) in out.iter().enumerate() {
        match o {
            Outbound::Send(Message::Err(_)) | Outbound::Send(Message::Ack(_)) => {}
            Outbound::Send(Message::Hello(Hello::Server(_))) => {}
            Outbound::Close => assert_eq!(i, out.len() - 1, "close must be last"),
            other => panic!("connection produced {other:?}"),
        }
    }
    if out.last() == Some(&Outbound::Close) {
        assert!(conn.is_closed());
    }
}

#[test]
fn a_million_random_streams_only_produce_errors_or_replies() {
    let mock = Mock::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut closes = 0u32;
    for i in 0..1_000_000u32 {
        let authed = i % 2 == 0;
        let mut conn = Connection::new(u64::from(i), Arc::new(Flow::new(authed)));
        let bytes = random_stream(&mut rng);
        // Deliver in up to three pieces to exercise partial envelopes.
        let a = rng.gen_range(0..=bytes.len());
        let b = rng.gen_range(a..=bytes.len());
        for piece in [&bytes[..a], &bytes[a..b], &bytes[b..]] {
            let out = conn.on_bytes(piece, &mock);
            check(&out, &conn);
            if conn.is_closed() {
                closes += 1;
                assert!(conn.on_bytes(b"PEEG", &mock).is_empty(), "closed connections stay silent");
                break;
            }
        }
    }
    assert!(closes > 100_000, "only {closes} fatal streams; the generator is too tame");
}

#[test]
fn a_long_hostile_session_never_panics() {
    let mock = Mock::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut conn = Connection::new(1, Arc::new(Flow::new(true)));
    let mut acks = 0;
    for id in 0..20_000u64 {
        let mut bytes = if rng.gen_bool(0.7) {
            encode(&Message::Cmd(Command {
                id: id % 300,
                op: CmdOp::Wreg { addr: rng.gen_range(0..0x20), value: rng.gen() },
            }))
            .unwrap()
        } else {
            let mut f = peeg_stream::frame(rng.gen_range(0x01..=0x06), &[]).unwrap();
            f.extend((0..rng.gen_range(0..16)).map(|_| rng.gen::<u8>()));
            f
        };
        if rng.gen_bool(0.01) {
            bytes[0] ^= 0xFF;
        }
        let out = conn.on_bytes(&bytes, &mock);
        check(&out, &conn);
        acks += out.iter().filter(|o| matches!(o, Outbound::Send(Message::Ack(Ack { .. })))).count();
        if conn.is_closed() {
            conn = Connection::new(id + 2, Arc::new(Flow::new(true)));
        }
    }
    assert!(acks > 0);
}

#[test]
fn duplicate_ids_reach_the_station_once() {
    let mock = Mock::default();
    let mut conn = Connection::new(1, Arc::new(Flow::new(true)));
    let cmd = encode(&Message::Cmd(Command { id: 77, op: CmdOp::Wreg { addr: 5, value: 0x50 } })).unwrap();
    let first = conn.on_bytes(&cmd, &mock);
    let second = conn.on_bytes(&cmd, &mock);
    assert_eq!(first, second);
    assert_eq!(mock.writes.load(Ordering::SeqCst), 1);
}

#[test]
fn unauthenticated_commands_are_refused_and_not_remembered() {
    let mock = Mock::default();
    let flow = Arc::new(Flow::new(false));
    let mut conn = Connection::new(1, Arc::clone(&flow));
    let cmd = encode(&Message::Cmd(Command { id: 3, op: CmdOp::Wreg { addr: 5, value: 0x50 } })).unwrap();
    let out = conn.on_bytes(&cmd, &mock);
    assert!(matches!(&out[..], [Outbound::Send(Message::Err(e))] if e.code == ErrorCode::Unauthorized));
    let bad = encode(&Message::Hello(Hello::Client(peeg_stream::ClientHello {
        client: "t".into(),
        token: Some("nope".into()),
    })))
    .unwrap();
    let out = conn.on_bytes(&bad, &mock);
    assert!(matches!(&out[..], [Outbound::Send(Message::Err(e))] if e.code == ErrorCode::Unauthorized));
    assert!(!flow.wants_data());
    let good = encode(&Message::Hello(Hello::Client(peeg_stream::ClientHello {
        client: "t".into(),
        token: Some("tok".into()),
    })))
    .unwrap();
    let out = conn.on_bytes(&good, &mock);
    assert!(matches!(&out[..], [Outbound::Send(Message::Hello(Hello::Server(h)))] if h.authenticated));
    assert!(flow.wants_data());
    let out = conn.on_bytes(&cmd, &mock);
    assert!(matches!(&out[..], [Outbound::Send(Message::Ack(a))] if a.epoch == Some(1)));
}

#[test]
fn credit_switches_to_manual_and_saturates() {
    let mock = Mock::default();
    let flow = Arc::new(Flow::new(true));
    let mut conn = Connection::new(1, Arc::clone(&flow));
    assert!(flow.has_credit());
    flow.spend_credit();
    assert!(flow.has_credit(), "auto mode refills");
    let grant = |id, blocks| encode(&Message::Cmd(Command { id, op: CmdOp::Credit { blocks } })).unwrap();
    conn.on_bytes(&grant(1, 2), &mock);
    assert!(flow.has_credit());
    flow.spend_credit();
    flow.spend_credit();
    assert!(!flow.has_credit());
    conn.on_bytes(&grant(2, u32::MAX), &mock);
    conn.on_bytes(&grant(3, u32::MAX), &mock);
    assert_eq!(flow.credit.load(Ordering::SeqCst), peeg_stream::MAX_CREDIT);
}
