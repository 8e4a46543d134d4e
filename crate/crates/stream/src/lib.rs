//! Station wire protocol and server.
//!
//! Every message is a 10-byte envelope (`PEEG`, version, type, body length
//! as `u32` LE) followed by the body. DATA bodies are binary; HELLO,
//! METRICS, CMD, ACK and ERR bodies are JSON objects. The same frames travel
//! over plain TCP and as binary WebSocket messages.

mod client;
mod codec;
mod connection;
mod message;
mod metrics;
mod server;
mod station;

pub use client::{Client, ClientError};
pub use codec::{
    decode_body, decode_message, encode, frame, CodecError, Decoder, ENVELOPE_LEN, MAGIC, MAX_BODY_LEN,
    PROTOCOL_VERSION,
};
pub use connection::{CmdError, Connection, Control, Flow, Outbound, DEFAULT_CREDIT, MAX_CREDIT};
pub use message::*;
pub use metrics::{MetricsEngine, DEDUP_S, EVENT_CHANNEL, INTERVAL_S, WINDOW_S};
pub use server::{serve, Server, ServerConfig, StreamError, DEFAULT_TCP_ADDR, DEFAULT_WS_ADDR, WS_PATH};
pub use station::{parse_scenario, AnnotationSink, Follower, Rebuild, RebuildRequest, Station, StationOptions};
