//! Blocking TCP client, used by the CLI and tests.

use std::collections::VecDeque;
use std::io::{self, ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use crate::codec::{encode, CodecError, Decoder};
use crate::message::*;

/// Messages kept while waiting for a command reply.
const BACKLOG: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("protocol error: {0}")]
    Codec(#[from] CodecError),
    #[error("server error {}: {}", .0.code, .0.text)]
    Remote(ErrorMsg),
    #[error("timed out waiting for the server")]
    Timeout,
    #[error("connection closed by the server")]
    Closed,
    #[error("{0}")]
    Protocol(String),
}

pub struct Client {
    stream: TcpStream,
    decoder: Decoder,
    hello: ServerHello,
    next_id: u64,
    backlog: VecDeque<Message>,
}

impl Client {
    /// Connects, reads the server HELLO and authenticates when required.
    /// `endpoint` is `host:port`, optionally prefixed with `tcp://`.
    pub fn connect(endpoint: &str, token: Option<&str>, timeout: Duration) -> Result<Self, ClientError> {
        let addr = endpoint.strip_prefix("tcp://").unwrap_or(endpoint);
        let sock = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| ClientError::Protocol(format!("cannot resolve {addr}")))?;
        let stream = TcpStream::connect_timeout(&sock, timeout)?;
        stream.set_nodelay(true)?;
        Self::handshake(stream, token, timeout)
    }

    fn handshake(stream: TcpStream, token: Option<&str>, timeout: Duration) -> Result<Self, ClientError> {
        let mut c = Self {
            stream,
            decoder: Decoder::new(),
            hello: placeholder_hello(),
            next_id: 1,
            backlog: VecDeque::new(),
        };
        match c.read_message(timeout)? {
            Message::Hello(Hello::Server(h)) => c.hello = h,
            other => return Err(ClientError::Protocol(format!("expected HELLO first, got {other:?}"))),
        }
        if c.hello.auth_required || token.is_some() {
            c.send(&Message::Hello(Hello::Client(ClientHello {
                client: format!("peeg-client/{}", env!("CARGO_PKG_VERSION")),
                token: token.map(str::to_string),
            })))?;
            let deadline = Instant::now() + timeout;
            loop {
                match c.read_message(remaining(deadline)?)? {
                    Message::Hello(Hello::Server(h)) if h.authenticated => {
                        c.hello = h;
                        break;
                    }
                    Message::Hello(Hello::Server(h)) => c.hello = h,
                    Message::Err(e) if e.code == ErrorCode::Unauthorized && e.id.is_none() => {
                        return Err(ClientError::Remote(e))
                    }
                    other => c.stash(other),
                }
            }
        }
        Ok(c)
    }

    /// The most recent server HELLO.
    pub fn hello(&self) -> &ServerHello {
        &self.hello
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), ClientError> {
        let bytes = encode(msg)?;
        self.send_raw(&bytes)
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.stream.write_all(bytes)?;
        Ok(())
    }

    fn stash(&mut self, m: Message) {
        if self.backlog.len() == BACKLOG {
            self.backlog.pop_front();
        }
        self.backlog.push_back(m);
    }

    fn read_message(&mut self, timeout: Duration) -> Result<Message, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(item) = self.decoder.next_message() {
                let m = item?;
                if let Message::Hello(Hello::Server(h)) = &m {
                    self.hello = h.clone();
                }
                return Ok(m);
            }
            self.stream.set_read_timeout(Some(remaining(deadline)?))?;
            let mut buf = [0u8; 64 * 1024];
            match self.stream.read(&mut buf) {
                Ok(0) => return Err(ClientError::Closed),
                Ok(n) => self.decoder.push(&buf[..n]),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    return Err(ClientError::Timeout)
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Next message in arrival order.
    pub fn recv(&mut self, timeout: Duration) -> Result<Message, ClientError> {
        match self.backlog.pop_front() {
            Some(m) => Ok(m),
            None => self.read_message(timeout),
        }
    }

    /// Next DATA message, skipping everything else.
    pub fn recv_data(&mut self, timeout: Duration) -> Result<DataBlock, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Message::Data(d) = self.recv(remaining(deadline)?)? {
                return Ok(d);
            }
        }
    }

    /// Sends a command and waits for its ACK; other messages are kept for [`recv`](Self::recv).
    pub fn command(&mut self, op: CmdOp, timeout: Duration) -> Result<Ack, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        self.command_with_id(id, op, timeout)
    }

    pub fn command_with_id(&mut self, id: u64, op: CmdOp, timeout: Duration) -> Result<Ack, ClientError> {
        self.send(&Message::Cmd(Command { id, op }))?;
        let deadline = Instant::now() + timeout;
        loop {
            match self.read_message(remaining(deadline)?)? {
                Message::Ack(a) if a.id == id => return Ok(a),
                Message::Err(e) if e.id == Some(id) => return Err(ClientError::Remote(e)),
                other => self.stash(other),
            }
        }
    }

    pub fn into_stream(self) -> TcpStream {
        self.stream
    }
}

fn remaining(deadline: Instant) -> Result<Duration, ClientError> {
    let left = deadline.saturating_duration_since(Instant::now());
    if left.is_zero() {
        Err(ClientError::Timeout)
    } else {
        Ok(left)
    }
}

fn placeholder_hello() -> ServerHello {
    ServerHello {
        server: String::new(),
        protocol: 0,
        client_id: 0,
        fs: 0,
        channels: Vec::new(),
        gains: Vec::new(),
        block_len: 0,
        backend: String::new(),
        state: String::new(),
        epoch: 0,
        auth_required: false,
        authenticated: false,
        default_credit: 0,
    }
}
