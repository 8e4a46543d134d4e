//! Message bodies. DATA is binary; every other body is a UTF-8 JSON object.

use peeg_acquisition::SampleBlock;
use peeg_ads1299::CHANNELS;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TYPE_HELLO: u8 = 0x01;
pub const TYPE_DATA: u8 = 0x02;
pub const TYPE_METRICS: u8 = 0x03;
pub const TYPE_CMD: u8 = 0x04;
pub const TYPE_ACK: u8 = 0x05;
pub const TYPE_ERR: u8 = 0x06;

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello(Hello),
    Data(DataBlock),
    Metrics(Metrics),
    Cmd(Command),
    Ack(Ack),
    Err(ErrorMsg),
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Hello(_) => TYPE_HELLO,
            Message::Data(_) => TYPE_DATA,
            Message::Metrics(_) => TYPE_METRICS,
            Message::Cmd(_) => TYPE_CMD,
            Message::Ack(_) => TYPE_ACK,
            Message::Err(_) => TYPE_ERR,
        }
    }
}

/// Both directions use HELLO; `role` tells them apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum Hello {
    Server(ServerHello),
    Client(ClientHello),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerHello {
    pub server: String,
    pub protocol: u8,
    /// Connection id assigned by the server.
    pub client_id: u64,
    pub fs: u32,
    pub channels: Vec<String>,
    pub gains: Vec<u32>,
    pub block_len: u32,
    pub backend: String,
    /// `idle`, `running` or `finished`.
    pub state: String,
    pub epoch: u32,
    pub auth_required: bool,
    /// True once this connection may send commands and receive data.
    pub authenticated: bool,
    pub default_credit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientHello {
    #[serde(default)]
    pub client: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

/// One block as sent to a client: channel-major `f32` microvolts, optionally
/// followed by the raw codes in the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    pub seq: u64,
    pub t0_ns: u64,
    /// Source samples per channel skipped since the previous DATA on this connection.
    pub dropped_before: u64,
    pub epoch: u32,
    /// Source rate; samples in this block are `decimation / fs` seconds apart.
    pub fs: u32,
    pub decimation: u16,
    pub gains: [u8; CHANNELS],
    pub samples: Vec<f32>,
    pub codes: Option<Vec<i32>>,
}

impl DataBlock {
    /// Fixed part of the body before the sample payload.
    pub const HEADER_LEN: usize = 8 + 8 + 8 + 4 + 4 + 2 + 1 + 1 + 4 + CHANNELS;
    pub const FLAG_CODES: u8 = 0x01;

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.samples.len() / CHANNELS
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.len();
        &self.samples[c * n..(c + 1) * n]
    }

    /// Body length in bytes for `n` samples per channel.
    pub fn body_len(n: usize, with_codes: bool) -> usize {
        Self::HEADER_LEN + n * CHANNELS * 4 * if with_codes { 2 } else { 1 }
    }

    /// Keeps every `decimation`-th sample, counting from `phase`
    /// (the number of source samples already consumed modulo `decimation`).
    pub fn from_block(block: &SampleBlock, decimation: u16, phase: u64, with_codes: bool) -> Self {
        let d = u64::from(decimation.max(1));
        let n = block.len();
        let first = ((d - phase % d) % d) as usize;
        let picks: Vec<usize> = (first..n).step_by(d as usize).collect();
        let mut samples = Vec::with_capacity(picks.len() * CHANNELS);
        let mut codes = with_codes.then(|| Vec::with_capacity(picks.len() * CHANNELS));
        for c in 0..CHANNELS {
            let ch = block.channel(c);
            samples.extend(picks.iter().map(|&i| ch[i] as f32));
            if let Some(codes) = codes.as_mut() {
                let cc = block.channel_codes(c);
                codes.extend(picks.iter().map(|&i| cc[i]));
            }
        }
        let offset_ns = first as u64 * 1_000_000_000 / u64::from(block.fs.max(1));
        Self {
            seq: block.seq,
            t0_ns: block.t0_ns + offset_ns,
            dropped_before: block.dropped_before,
            epoch: block.epoch,
            fs: block.fs,
            decimation: decimation.max(1),
            gains: block.gain_values(),
            samples,
            codes,
        }
    }
}

/// Periodic summary computed on the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Sequence number of the last block included.
    pub seq: u64,
    /// Stream time at the end of that block.
    pub t_s: f64,
    /// Length of the analysis window.
    pub window_s: f64,
    /// 8–12 Hz band power per channel in µV²; empty until a full window is buffered.
    pub alpha_uv2: Vec<f64>,
    /// Running totals since the metrics engine started.
    pub blinks: u64,
    pub chews: u64,
    /// Samples per channel the metrics subscriber lost.
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub id: u64,
    #[serde(flatten)]
    pub op: CmdOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CmdOp {
    Start,
    Stop,
    Rreg {
        addr: u8,
    },
    Wreg {
        addr: u8,
        value: u8,
    },
    Annotate {
        text: String,
        /// Defaults to the current stream time.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        time_s: Option<f64>,
    },
    /// A scenario shortcut name (`"fig6"`) or a full scenario object.
    SetScenario {
        scenario: Value,
    },
    /// Fields left out keep their current value.
    Subscribe {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metrics: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decimation: Option<u16>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        codes: Option<bool>,
    },
    /// Grants `blocks` more DATA frames and switches the connection to manual credit.
    Credit {
        blocks: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub id: u64,
    pub ok: bool,
    /// Register value for RREG and WREG.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u8>,
    /// Configuration epoch after WREG.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Ack {
    pub fn ok(id: u64) -> Self {
        Self {
            id,
            ok: true,
            value: None,
            epoch: None,
            detail: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadMagic,
    BadVersion,
    UnknownType,
    LengthOverflow,
    Malformed,
    InvalidReg,
    Unsupported,
    NotRunning,
    Unauthorized,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadMagic => "BAD_MAGIC",
            ErrorCode::BadVersion => "BAD_VERSION",
            ErrorCode::UnknownType => "UNKNOWN_TYPE",
            ErrorCode::LengthOverflow => "LENGTH_OVERFLOW",
            ErrorCode::Malformed => "MALFORMED",
            ErrorCode::InvalidReg => "INVALID_REG",
            ErrorCode::Unsupported => "UNSUPPORTED",
            ErrorCode::NotRunning => "NOT_RUNNING",
            ErrorCode::Unauthorized => "UNAUTHORIZED",
            ErrorCode::Internal => "INTERNAL",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMsg {
    /// Command id, when the error answers a command.
    #[serde(default)]
    pub id: Option<u64>,
    pub code: ErrorCode,
    pub text: String,
}

impl ErrorMsg {
    pub fn new(id: Option<u64>, code: ErrorCode, text: impl Into<String>) -> Self {
        Self {
            id,
            code,
            text: text.into(),
        }
    }
}
