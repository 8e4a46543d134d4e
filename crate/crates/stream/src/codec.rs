//! Frame envelope: `PEEG`, version `u8`, type `u8`, body length `u32` LE, body.

use peeg_ads1299::CHANNELS;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::message::*;

pub const MAGIC: &[u8; 4] = b"PEEG";
pub const PROTOCOL_VERSION: u8 = 1;
pub const ENVELOPE_LEN: usize = 10;
pub const MAX_BODY_LEN: u32 = 16 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("body of {0} bytes exceeds the 16 MiB limit")]
    LengthOverflow(u64),
    #[error("malformed {kind} body: {reason}")]
    Malformed { kind: &'static str, reason: String },
    #[error("input ends inside a frame")]
    Truncated,
    #[error("{0} bytes after the frame")]
    TrailingBytes(usize),
}

impl CodecError {
    /// Framing is lost after these; the connection must be closed.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            CodecError::BadMagic | CodecError::BadVersion(_) | CodecError::LengthOverflow(_)
        )
    }

    pub fn code(&self) -> ErrorCode {
        match self {
            CodecError::BadMagic => ErrorCode::BadMagic,
            CodecError::BadVersion(_) => ErrorCode::BadVersion,
            CodecError::UnknownType(_) => ErrorCode::UnknownType,
            CodecError::LengthOverflow(_) => ErrorCode::LengthOverflow,
            CodecError::Malformed { .. } | CodecError::Truncated | CodecError::TrailingBytes(_) => {
                ErrorCode::Malformed
            }
        }
    }
}

fn malformed(kind: &'static str, reason: impl Into<String>) -> CodecError {
    CodecError::Malformed {
        kind,
        reason: reason.into(),
    }
}

pub fn encode(msg: &Message) -> Result<Vec<u8>, CodecError> {
    let body = match msg {
        Message::Hello(h) => json(h, "HELLO")?,
        Message::Data(d) => encode_data(d)?,
        Message::Metrics(m) => json(m, "METRICS")?,
        Message::Cmd(c) => json(c, "CMD")?,
        Message::Ack(a) => json(a, "ACK")?,
        Message::Err(e) => json(e, "ERR")?,
    };
    frame(msg.type_byte(), &body)
}

/// Wraps an arbitrary body in an envelope.
pub fn frame(ty: u8, body: &[u8]) -> Result<Vec<u8>, CodecError> {
    if body.len() as u64 > u64::from(MAX_BODY_LEN) {
        return Err(CodecError::LengthOverflow(body.len() as u64));
    }
    let mut out = Vec::with_capacity(ENVELOPE_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.push(PROTOCOL_VERSION);
    out.push(ty);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
    Ok(out)
}

fn json<T: Serialize>(v: &T, kind: &'static str) -> Result<Vec<u8>, CodecError> {
    serde_json::to_vec(v).map_err(|e| malformed(kind, e.to_string()))
}

fn encode_data(d: &DataBlock) -> Result<Vec<u8>, CodecError> {
    if d.samples.len() % CHANNELS != 0 {
        return Err(malformed("DATA", "sample count is not a multiple of 8"));
    }
    let n = d.len();
    if let Some(codes) = &d.codes {
        if codes.len() != d.samples.len() {
            return Err(malformed("DATA", "code count differs from sample count"));
        }
    }
    if n > u32::MAX as usize || d.decimation == 0 {
        return Err(malformed("DATA", "bad sample count or decimation"));
    }
    let mut out = Vec::with_capacity(DataBlock::body_len(n, d.codes.is_some()));
    out.extend_from_slice(&d.seq.to_le_bytes());
    out.extend_from_slice(&d.t0_ns.to_le_bytes());
    out.extend_from_slice(&d.dropped_before.to_le_bytes());
    out.extend_from_slice(&d.epoch.to_le_bytes());
    out.extend_from_slice(&d.fs.to_le_bytes());
    out.extend_from_slice(&d.decimation.to_le_bytes());
    out.push(if d.codes.is_some() { DataBlock::FLAG_CODES } else { 0 });
    out.push(CHANNELS as u8);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&d.gains);
    for s in &d.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for c in d.codes.iter().flatten() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    Ok(out)
}

fn decode_data(b: &[u8]) -> Result<DataBlock, CodecError> {
    let bad = |r: &str| malformed("DATA", r);
    if b.len() < DataBlock::HEADER_LEN {
        return Err(bad("shorter than the block header"));
    }
    let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().expect("8 bytes"));
    let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes"));
    let decimation = u16::from_le_bytes([b[32], b[33]]);
    let flags = b[34];
    let channels = b[35];
    let n = u32_at(36) as usize;
    if decimation == 0 {
        return Err(bad("decimation 0"));
    }
    if flags & !DataBlock::FLAG_CODES != 0 {
        return Err(bad("unknown flag bits"));
    }
    if channels as usize != CHANNELS {
        return Err(bad("channel count is not 8"));
    }
    let with_codes = flags & DataBlock::FLAG_CODES != 0;
    let expected = (n as u64)
        .checked_mul(CHANNELS as u64 * 4 * if with_codes { 2 } else { 1 })
        .and_then(|v| v.checked_add(DataBlock::HEADER_LEN as u64));
    if expected != Some(b.len() as u64) {
        return Err(bad("length does not match the sample count"));
    }
    let mut gains = [0u8; CHANNELS];
    gains.copy_from_slice(&b[40..40 + CHANNELS]);
    let payload = &b[DataBlock::HEADER_LEN..];
    let (sample_bytes, code_bytes) = payload.split_at(n * CHANNELS * 4);
    let samples = sample_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let codes = with_codes.then(|| {
        code_bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()
    });
    Ok(DataBlock {
        seq: u64_at(0),
        t0_ns: u64_at(8),
        dropped_before: u64_at(16),
        epoch: u32_at(24),
        fs: u32_at(28),
        decimation,
        gains,
        samples,
        codes,
    })
}

fn from_json<T: DeserializeOwned>(b: &[u8], kind: &'static str) -> Result<T, CodecError> {
    serde_json::from_slice(b).map_err(|e| malformed(kind, e.to_string()))
}

/// Parses a body of a known type.
pub fn decode_body(ty: u8, body: &[u8]) -> Result<Message, CodecError> {
    Ok(match ty {
        TYPE_HELLO => Message::Hello(from_json(body, "HELLO")?),
        TYPE_DATA => Message::Data(decode_data(body)?),
        TYPE_METRICS => Message::Metrics(from_json(body, "METRICS")?),
        TYPE_CMD => Message::Cmd(from_json(body, "CMD")?),
        TYPE_ACK => Message::Ack(from_json(body, "ACK")?),
        TYPE_ERR => Message::Err(from_json(body, "ERR")?),
        other => return Err(CodecError::UnknownType(other)),
    })
}

/// Checks the envelope at the start of `buf`. `Ok(None)` means more bytes
/// are needed; mismatches are reported as soon as the offending byte arrives.
fn envelope(buf: &[u8]) -> Result<Option<(u8, usize)>, CodecError> {
    let m = buf.len().min(MAGIC.len());
    if buf[..m] != MAGIC[..m] {
        return Err(CodecError::BadMagic);
    }
    if let Some(&v) = buf.get(4) {
        if v != PROTOCOL_VERSION {
            return Err(CodecError::BadVersion(v));
        }
    }
    if buf.len() < ENVELOPE_LEN {
        return Ok(None);
    }
    let len = u32::from_le_bytes(buf[6..10].try_into().expect("4 bytes"));
    if len > MAX_BODY_LEN {
        return Err(CodecError::LengthOverflow(u64::from(len)));
    }
    Ok(Some((buf[5], len as usize)))
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_message(bytes: &[u8]) -> Result<Message, CodecError> {
    let (ty, len) = envelope(bytes)?.ok_or(CodecError::Truncated)?;
    let end = ENVELOPE_LEN + len;
    if bytes.len() < end {
        return Err(CodecError::Truncated);
    }
    if bytes.len() > end {
        return Err(CodecError::TrailingBytes(bytes.len() - end));
    }
    decode_body(ty, &bytes[ENVELOPE_LEN..end])
}

/// Incremental decoder for a byte stream. After a fatal error it yields
/// nothing more.
#[derive(Debug, Default)]
pub struct Decoder {
    buf: Vec<u8>,
    start: usize,
    failed: bool,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.failed {
            return;
        }
        if self.start > 0 && self.start >= self.buf.len() / 2 {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet consumed.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }

    pub fn has_failed(&self) -> bool {
        self.failed
    }

    /// Next complete frame, `None` when more input is needed. Non-fatal
    /// errors consume their frame.
    pub fn next_message(&mut self) -> Option<Result<Message, CodecError>> {
        if self.failed {
            return None;
        }
        let pending = &self.buf[self.start..];
        if pending.is_empty() {
            return None;
        }
        match envelope(pending) {
            Err(e) => {
                self.failed = true;
                self.buf = Vec::new();
                self.start = 0;
                Some(Err(e))
            }
            Ok(None) => None,
            Ok(Some((ty, len))) => {
                if pending.len() < ENVELOPE_LEN + len {
                    return None;
                }
                let body = &pending[ENVELOPE_LEN..ENVELOPE_LEN + len];
                let out = decode_body(ty, body);
                self.start += ENVELOPE_LEN + len;
                Some(out)
            }
        }
    }
}

impl Iterator for Decoder {
    type Item = Result<Message, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_message()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, codes: bool) -> DataBlock {
        DataBlock {
            seq: 3,
            t0_ns: 12_000_000,
            dropped_before: 0,
            epoch: 1,
            fs: 250,
            decimation: 1,
            gains: [24; 8],
            samples: (0..n * 8).map(|i| i as f32 * 0.5).collect(),
            codes: codes.then(|| (0..n as i32 * 8).collect()),
        }
    }

    #[test]
    fn data_length_field_is_header_plus_payload() {
        let bytes = encode(&Message::Data(data(25, false))).unwrap();
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        assert_eq!(len, 48 + 8 * 25 * 4);
        assert_eq!(bytes.len(), 10 + len);
        let with_codes = encode(&Message::Data(data(25, true))).unwrap();
        assert_eq!(with_codes.len(), 10 + 48 + 2 * 800);
    }

    #[test]
    fn magic_mismatch_is_reported_on_the_first_wrong_byte() {
        let mut d = Decoder::new();
        d.push(b"P");
        assert!(d.next_message().is_none());
        d.push(b"X");
        assert_eq!(d.next_message(), Some(Err(CodecError::BadMagic)));
        assert!(d.next_message().is_none());
        assert_eq!(decode_message(b"GET / HTTP/1.1\r\n"), Err(CodecError::BadMagic));
        assert_eq!(decode_message(b""), Err(CodecError::Truncated));
    }

    #[test]
    fn oversize_length_is_fatal_before_the_body_arrives() {
        let mut hdr = b"PEEG\x01\x04".to_vec();
        hdr.extend_from_slice(&(MAX_BODY_LEN + 1).to_le_bytes());
        let mut d = Decoder::new();
        d.push(&hdr);
        let err = d.next_message().unwrap().unwrap_err();
        assert!(err.is_fatal());
        assert_eq!(err.code(), ErrorCode::LengthOverflow);
    }

    #[test]
    fn unknown_type_skips_the_frame() {
        let mut bytes = frame(0x42, b"whatever").unwrap();
        bytes.extend(encode(&Message::Ack(Ack::ok(9))).unwrap());
        let mut d = Decoder::new();
        d.push(&bytes);
        assert_eq!(d.next_message(), Some(Err(CodecError::UnknownType(0x42))));
        assert_eq!(d.next_message(), Some(Ok(Message::Ack(Ack::ok(9)))));
        assert_eq!(d.next_message(), None);
    }

    #[test]
    fn byte_at_a_time_delivery() {
        let msgs = vec![
            Message::Cmd(Command {
                id: 1,
                op: CmdOp::Wreg { addr: 5, value: 0x60 },
            }),
            Message::Data(data(3, true)),
            Message::Err(ErrorMsg::new(None, ErrorCode::Malformed, "x")),
        ];
        let bytes: Vec<u8> = msgs.iter().flat_map(|m| encode(m).unwrap()).collect();
        let mut d = Decoder::new();
        let mut out = Vec::new();
        for b in bytes {
            d.push(&[b]);
            out.extend(d.by_ref().map(Result::unwrap));
        }
        assert_eq!(out, msgs);
        assert_eq!(d.buffered(), 0);
    }

    #[test]
    fn command_json_shape() {
        let c = Command {
            id: 7,
            op: CmdOp::Wreg { addr: 5, value: 96 },
        };
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"id":7,"op":"wreg","addr":5,"value":96}"#);
        let parsed: Command = serde_json::from_str(r#"{"op":"rreg","id":2,"addr":0}"#).unwrap();
        assert_eq!(parsed.op, CmdOp::Rreg { addr: 0 });
        let e = ErrorMsg::new(Some(3), ErrorCode::InvalidReg, "read-only");
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"id":3,"code":"INVALID_REG","text":"read-only"}"#
        );
    }

    #[test]
    fn bad_data_bodies() {
        let good = encode_data(&data(2, false)).unwrap();
        let mut chans = good.clone();
        chans[35] = 4;
        assert!(decode_data(&chans).is_err());
        let mut flags = good.clone();
        flags[34] = 0x80;
        assert!(decode_data(&flags).is_err());
        let mut dec = good.clone();
        dec[32] = 0;
        dec[33] = 0;
        assert!(decode_data(&dec).is_err());
        assert!(decode_data(&good[..good.len() - 1]).is_err());
        let mut huge = good.clone();
        huge[36..40].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_data(&huge).is_err());
    }
}
