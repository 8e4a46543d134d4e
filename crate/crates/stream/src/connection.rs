//! Per-connection protocol state, independent of sockets and threads.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU16, Ordering};

use serde_json::Value;

use crate::codec::Decoder;
use crate::message::*;

pub const DEFAULT_CREDIT: u32 = 64;
/// Manual credit never accumulates past this many blocks.
pub const MAX_CREDIT: i64 = 1 << 20;
/// Remembered command ids per connection for duplicate detection.
const ANSWER_MEMORY: usize = 4096;

/// Failure of a station operation, reported to the client as ERR.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdError {
    pub code: ErrorCode,
    pub text: String,
}

impl CmdError {
    pub fn new(code: ErrorCode, text: impl Into<String>) -> Self {
        Self {
            code,
            text: text.into(),
        }
    }
}

/// Station operations a connection can invoke.
pub trait Control: Send + Sync {
    fn hello(&self, client_id: u64, authenticated: bool) -> ServerHello;
    /// `None` when connections are open without a token.
    fn check_token(&self, token: Option<&str>) -> Option<bool>;
    fn start(&self) -> Result<Option<String>, CmdError>;
    fn stop(&self) -> Result<(), CmdError>;
    fn read_register(&self, addr: u8) -> Result<u8, CmdError>;
    /// Returns the configuration epoch after the write.
    fn write_register(&self, addr: u8, value: u8) -> Result<u32, CmdError>;
    /// Returns a note for the ACK, e.g. when nothing is recording.
    fn annotate(&self, time_s: Option<f64>, text: &str) -> Result<Option<String>, CmdError>;
    fn set_scenario(&self, scenario: &Value) -> Result<(), CmdError>;
}

/// Subscription and credit state shared with the connection's writer.
#[derive(Debug)]
pub struct Flow {
    pub data: AtomicBool,
    pub metrics: AtomicBool,
    pub decimation: AtomicU16,
    pub codes: AtomicBool,
    pub authenticated: AtomicBool,
    pub manual_credit: AtomicBool,
    pub credit: AtomicI64,
}

impl Flow {
    pub fn new(authenticated: bool) -> Self {
        Self {
            data: AtomicBool::new(true),
            metrics: AtomicBool::new(true),
            decimation: AtomicU16::new(1),
            codes: AtomicBool::new(false),
            authenticated: AtomicBool::new(authenticated),
            manual_credit: AtomicBool::new(false),
            credit: AtomicI64::new(i64::from(DEFAULT_CREDIT)),
        }
    }

    pub fn wants_data(&self) -> bool {
        self.authenticated.load(Ordering::SeqCst) && self.data.load(Ordering::SeqCst)
    }

    pub fn wants_metrics(&self) -> bool {
        self.authenticated.load(Ordering::SeqCst) && self.metrics.load(Ordering::SeqCst)
    }

    pub fn has_credit(&self) -> bool {
        !self.manual_credit.load(Ordering::SeqCst) || self.credit.load(Ordering::SeqCst) > 0
    }

    /// Accounts one DATA frame written to the socket. In auto mode the window refills at once.
    pub fn spend_credit(&self) {
        if self.manual_credit.load(Ordering::SeqCst) {
            self.credit.fetch_sub(1, Ordering::SeqCst);
        }
    }

    fn grant(&self, blocks: u32) {
        if !self.manual_credit.swap(true, Ordering::SeqCst) {
            self.credit.store(0, Ordering::SeqCst);
        }
        let add = i64::from(blocks);
        let _ = self
            .credit
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| Some((c + add).min(MAX_CREDIT)));
    }
}

/// What the connection wants done on the socket.
#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Send(Message),
    /// Flush queued messages, then close.
    Close,
}

pub struct Connection {
    id: u64,
    decoder: Decoder,
    flow: std::sync::Arc<Flow>,
    answered: HashMap<u64, Message>,
    order: VecDeque<u64>,
    closed: bool,
}

impl Connection {
    pub fn new(id: u64, flow: std::sync::Arc<Flow>) -> Self {
        Self {
            id,
            decoder: Decoder::new(),
            flow,
            answered: HashMap::new(),
            order: VecDeque::new(),
            closed: false,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Feeds received bytes and returns the replies in order.
    pub fn on_bytes(&mut self, bytes: &[u8], ctl: &dyn Control) -> Vec<Outbound> {
        let mut out = Vec::new();
        if self.closed {
            return out;
        }
        self.decoder.push(bytes);
        while let Some(item) = self.decoder.next_message() {
            match item {
                Ok(msg) => self.on_message(msg, ctl, &mut out),
                Err(e) => {
                    out.push(Outbound::Send(Message::Err(ErrorMsg::new(None, e.code(), e.to_string()))));
                    if e.is_fatal() {
                        out.push(Outbound::Close);
                        self.closed = true;
                        break;
                    }
                }
            }
        }
        out
    }

    fn on_message(&mut self, msg: Message, ctl: &dyn Control, out: &mut Vec<Outbound>) {
        match msg {
            Message::Hello(Hello::Client(h)) => match ctl.check_token(h.token.as_deref()) {
                None | Some(true) => {
                    self.flow.authenticated.store(true, Ordering::SeqCst);
                    out.push(Outbound::Send(Message::Hello(Hello::Server(ctl.hello(self.id, true)))));
                }
                Some(false) => {
                    out.push(Outbound::Send(Message::Err(ErrorMsg::new(
                        None,
                        ErrorCode::Unauthorized,
                        "bad or missing token",
                    ))));
                }
            },
            Message::Cmd(cmd) => {
                if !self.flow.authenticated.load(Ordering::SeqCst) {
                    out.push(Outbound::Send(Message::Err(ErrorMsg::new(
                        Some(cmd.id),
                        ErrorCode::Unauthorized,
                        "send a client HELLO with the token first",
                    ))));
                    return;
                }
                if let Some(previous) = self.answered.get(&cmd.id) {
                    out.push(Outbound::Send(previous.clone()));
                    return;
                }
                let reply = self.execute(&cmd, ctl);
                self.remember(cmd.id, reply.clone());
                out.push(Outbound::Send(reply));
            }
            other => out.push(Outbound::Send(Message::Err(ErrorMsg::new(
                None,
                ErrorCode::Unsupported,
                format!("type {:#04x} is server-to-client only", other.type_byte()),
            )))),
        }
    }

    fn remember(&mut self, id: u64, reply: Message) {
        if self.order.len() == ANSWER_MEMORY {
            if let Some(old) = self.order.pop_front() {
                self.answered.remove(&old);
            }
        }
        self.order.push_back(id);
        self.answered.insert(id, reply);
    }

    fn execute(&mut self, cmd: &Command, ctl: &dyn Control) -> Message {
        let id = cmd.id;
        let result: Result<Ack, CmdError> = match &cmd.op {
            CmdOp::Start => ctl.start().map(|detail| Ack { detail, ..Ack::ok(id) }),
            CmdOp::Stop => ctl.stop().map(|_| Ack::ok(id)),
            CmdOp::Rreg { addr } => ctl.read_register(*addr).map(|v| Ack {
                value: Some(v),
                ..Ack::ok(id)
            }),
            CmdOp::Wreg { addr, value } => ctl.write_register(*addr, *value).map(|epoch| Ack {
                value: Some(*value),
                epoch: Some(epoch),
                ..Ack::ok(id)
            }),
            CmdOp::Annotate { text, time_s } => ctl
                .annotate(*time_s, text)
                .map(|detail| Ack { detail, ..Ack::ok(id) }),
            CmdOp::SetScenario { scenario } => ctl.set_scenario(scenario).map(|_| Ack::ok(id)),
            CmdOp::Subscribe {
                data,
                metrics,
                decimation,
                codes,
            } => {
                if *decimation == Some(0) {
                    Err(CmdError::new(ErrorCode::Malformed, "decimation must be at least 1"))
                } else {
                    if let Some(v) = data {
                        self.flow.data.store(*v, Ordering::SeqCst);
                    }
                    if let Some(v) = metrics {
                        self.flow.metrics.store(*v, Ordering::SeqCst);
                    }
                    if let Some(v) = decimation {
                        self.flow.decimation.store(*v, Ordering::SeqCst);
                    }
                    if let Some(v) = codes {
                        self.flow.codes.store(*v, Ordering::SeqCst);
                    }
                    Ok(Ack::ok(id))
                }
            }
            CmdOp::Credit { blocks } => {
                self.flow.grant(*blocks);
                Ok(Ack::ok(id))
            }
        };
        match result {
            Ok(ack) => Message::Ack(ack),
            Err(e) => Message::Err(ErrorMsg::new(Some(id), e.code, e.text)),
        }
    }
}
