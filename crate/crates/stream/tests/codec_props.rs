use peeg_stream::*;
use proptest::prelude::*;
use serde_json::json;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e6..1e6f64,
        Just(0.0),
        Just(-0.0),
    ]
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[a-zA-Z0-9 _-]{0,24}", any::<String>()]
}

fn data_block() -> impl Strategy<Value = DataBlock> {
    (0usize..40, any::<bool>()).prop_flat_map(|(n, with_codes)| {
        (
            (any::<u64>(), any::<u64>(), any::<u64>(), any::<u32>(), any::<u32>(), 1u16..=u16::MAX),
            proptest::array::uniform8(any::<u8>()),
            proptest::collection::vec(any::<f32>().prop_filter("not NaN", |v| !v.is_nan()), n * 8),
            proptest::option::of(proptest::collection::vec(any::<i32>(), n * 8)),
        )
            .prop_map(move |((seq, t0, drop, epoch, fs, dec), gains, samples, codes)| DataBlock {
                seq,
                t0_ns: t0,
                dropped_before: drop,
                epoch,
                fs,
                decimation: dec,
                gains,
                samples,
                codes: if with_codes { codes.or_else(|| Some(vec![0; n * 8])) } else { None },
            })
    })
}

fn cmd_op() -> impl Strategy<Value = CmdOp> {
    prop_oneof![
        Just(CmdOp::Start),
        Just(CmdOp::Stop),
        any::<u8>().prop_map(|addr| CmdOp::Rreg { addr }),
        (any::<u8>(), any::<u8>()).prop_map(|(addr, value)| CmdOp::Wreg { addr, value }),
        (text(), proptest::option::of(finite())).prop_map(|(text, time_s)| CmdOp::Annotate { text, time_s }),
        prop_oneof![Just(json!("fig6")), Just(json!({"fs": 250, "nested": [1, 2.5, null]}))]
            .prop_map(|scenario| CmdOp::SetScenario { scenario }),
        (
            proptest::option::of(any::<bool>()),
            proptest::option::of(any::<bool>()),
            proptest::option::of(1u16..),
            proptest::option::of(any::<bool>())
        )
            .prop_map(|(data, metrics, decimation, codes)| CmdOp::Subscribe {
                data,
                metrics,
                decimation,
                codes
            }),
        any::<u32>().prop_map(|blocks| CmdOp::Credit { blocks }),
    ]
}

fn error_code() -> impl Strategy<Value = ErrorCode> {
    prop_oneof![
        Just(ErrorCode::BadMagic),
        Just(ErrorCode::BadVersion),
        Just(ErrorCode::UnknownType),
        Just(ErrorCode::LengthOverflow),
        Just(ErrorCode::Malformed),
        Just(ErrorCode::InvalidReg),
        Just(ErrorCode::Unsupported),
        Just(ErrorCode::NotRunning),
        Just(ErrorCode::Unauthorized),
        Just(ErrorCode::Internal),
    ]
}

fn server_hello() -> impl Strategy<Value = ServerHello> {
    (
        (text(), any::<u8>(), any::<u64>(), any::<u32>()),
        (proptest::collection::vec(text(), 0..9), proptest::collection::vec(any::<u32>(), 0..9)),
        (any::<u32>(), text(), text(), any::<u32>()),
        (any::<bool>(), any::<bool>(), any::<u32>()),
    )
        .prop_map(
            |((server, protocol, client_id, fs), (channels, gains), (block_len, backend, state, epoch), (a, b, c))| {
                ServerHello {
                    server,
                    protocol,
                    client_id,
                    fs,
                    channels,
                    gains,
                    block_len,
                    backend,
                    state,
                    epoch,
                    auth_required: a,
                    authenticated: b,
                    default_credit: c,
                }
            },
        )
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        server_hello().prop_map(|h| Message::Hello(Hello::Server(h))),
        (text(), proptest::option::of(text()))
            .prop_map(|(client, token)| Message::Hello(Hello::Client(ClientHello { client, token }))),
        data_block().prop_map(Message::Data),
        (
            any::<u64>(),
            finite(),
            finite(),
            proptest::collection::vec(finite(), 0..9),
            any::<u64>(),
            any::<u64>(),
            any::<u64>()
        )
            .prop_map(|(seq, t_s, window_s, alpha_uv2, blinks, chews, dropped)| {
                Message::Metrics(Metrics {
                    seq,
                    t_s,
                    window_s,
                    alpha_uv2,
                    blinks,
                    chews,
                    dropped,
                })
            }),
        (any::<u64>(), cmd_op()).prop_map(|(id, op)| Message::Cmd(Command { id, op })),
        (
            any::<u64>(),
            any::<bool>(),
            proptest::option::of(any::<u8>()),
            proptest::option::of(any::<u32>()),
            proptest::option::of(text())
        )
            .prop_map(|(id, ok, value, epoch, detail)| Message::Ack(Ack {
                id,
                ok,
                value,
                epoch,
                detail
            })),
        (proptest::option::of(any::<u64>()), error_code(), text())
            .prop_map(|(id, code, text)| Message::Err(ErrorMsg { id, code, text })),
    ]
}

/// Bitwise comparison so `-0.0` and `0.0` samples are told apart.
fn same(a: &Message, b: &Message) -> bool {
    match (a, b) {
        (Message::Data(x), Message::Data(y)) => {
            x.samples.iter().map(|v| v.to_bits()).eq(y.samples.iter().map(|v| v.to_bits()))
                && DataBlock { samples: vec![], ..x.clone() } == DataBlock { samples: vec![], ..y.clone() }
        }
        _ => a == b,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn round_trip_identity(msg in message()) {
        let bytes = encode(&msg).unwrap();
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        prop_assert_eq!(len, bytes.len() - ENVELOPE_LEN);
        prop_assert_eq!(&bytes[..4], MAGIC);
        prop_assert_eq!(bytes[5], msg.type_byte());
        let back = decode_message(&bytes).unwrap();
        prop_assert!(same(&msg, &back), "{:?} != {:?}", msg, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn stream_split_anywhere_decodes_in_order(
        msgs in proptest::collection::vec(message(), 1..8),
        cuts in proptest::collection::vec(any::<prop::sample::Index>(), 0..6),
    ) {
        let bytes: Vec<u8> = msgs.iter().flat_map(|m| encode(m).unwrap()).collect();
        let mut points: Vec<usize> = cuts.iter().map(|c| c.index(bytes.len() + 1)).collect();
        points.push(0);
        points.push(bytes.len());
        points.sort_unstable();
        let mut d = Decoder::new();
        let mut out = Vec::new();
        for w in points.windows(2) {
            d.push(&bytes[w[0]..w[1]]);
            out.extend(d.by_ref().map(Result::unwrap));
        }
        prop_assert_eq!(out.len(), msgs.len());
        for (a, b) in msgs.iter().zip(&out) {
            prop_assert!(same(a, b));
        }
    }

    #[test]
    fn corrupted_magic_or_version_is_fatal(msg in message(), pos in 0usize..5, flip in 1u8..) {
        let mut bytes = encode(&msg).unwrap();
        bytes[pos] ^= flip;
        let err = decode_message(&bytes).unwrap_err();
        prop_assert!(err.is_fatal());
    }
}
