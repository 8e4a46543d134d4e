//! TCP and WebSocket listeners. Each client gets a reader thread that runs
//! the protocol state machine and a writer thread that owns the socket's
//! send side.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{Receiver, RecvTimeoutError, TryRecvError};
use peeg_acquisition::Overflow;
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::protocol::frame::coding::{Control as WsControl, Data as WsData, OpCode};
use tungstenite::protocol::frame::{Frame, FrameSocket};

use crate::codec::{encode, MAX_BODY_LEN};
use crate::connection::{Connection, Control, Flow, Outbound};
use crate::message::{DataBlock, ErrorCode, ErrorMsg, Hello, Message};
use crate::station::{Follower, Station};

pub const DEFAULT_TCP_ADDR: &str = "127.0.0.1:7715";
pub const DEFAULT_WS_ADDR: &str = "127.0.0.1:7716";
pub const WS_PATH: &str = "/stream";

const POLL: Duration = Duration::from_millis(10);
const IO_TIMEOUT: Duration = Duration::from_millis(100);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
/// Queued replies per client before its reader waits.
const OUTBOX: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("refusing to serve {0} without a token; set PEEG_TOKEN or bind to loopback")]
    Unauthenticated(SocketAddr),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub tcp: Option<SocketAddr>,
    pub ws: Option<SocketAddr>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            tcp: Some(DEFAULT_TCP_ADDR.parse().expect("valid address")),
            ws: Some(DEFAULT_WS_ADDR.parse().expect("valid address")),
        }
    }
}

impl ServerConfig {
    /// Both transports on ephemeral loopback ports.
    pub fn ephemeral() -> Self {
        Self {
            tcp: Some("127.0.0.1:0".parse().expect("valid address")),
            ws: Some("127.0.0.1:0".parse().expect("valid address")),
        }
    }
}

pub struct Server {
    station: Arc<Station>,
    tcp_addr: Option<SocketAddr>,
    ws_addr: Option<SocketAddr>,
    stop: Arc<AtomicBool>,
    clients: Arc<AtomicUsize>,
    threads: Vec<JoinHandle<()>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Transport {
    Tcp,
    WebSocket,
}

/// Binds the configured endpoints and starts accepting. Does not start the pipeline.
pub fn serve(station: Arc<Station>, cfg: &ServerConfig) -> Result<Server, StreamError> {
    for addr in [cfg.tcp, cfg.ws].into_iter().flatten() {
        if !addr.ip().is_loopback() && station.options().token.is_none() {
            return Err(StreamError::Unauthenticated(addr));
        }
    }
    let bind = |addr: SocketAddr| -> Result<TcpListener, StreamError> {
        let l = TcpListener::bind(addr).map_err(|source| StreamError::Bind { addr, source })?;
        l.set_nonblocking(true)?;
        Ok(l)
    };
    let tcp = cfg.tcp.map(bind).transpose()?;
    let ws = cfg.ws.map(bind).transpose()?;
    let stop = Arc::new(AtomicBool::new(false));
    let clients = Arc::new(AtomicUsize::new(0));
    let next_id = Arc::new(AtomicU64::new(1));
    let mut server = Server {
        station: Arc::clone(&station),
        tcp_addr: tcp.as_ref().map(|l| l.local_addr()).transpose()?,
        ws_addr: ws.as_ref().map(|l| l.local_addr()).transpose()?,
        stop: Arc::clone(&stop),
        clients: Arc::clone(&clients),
        threads: Vec::new(),
    };
    {
        let (station, stop) = (Arc::clone(&station), Arc::clone(&stop));
        server.threads.push(
            std::thread::Builder::new()
                .name("peeg-metrics".into())
                .spawn(move || station.run_metrics(&stop))?,
        );
    }
    for (listener, transport) in [(tcp, Transport::Tcp), (ws, Transport::WebSocket)] {
        let Some(listener) = listener else { continue };
        let (station, stop, clients, next_id) =
            (Arc::clone(&station), Arc::clone(&stop), Arc::clone(&clients), Arc::clone(&next_id));
        server.threads.push(
            std::thread::Builder::new()
                .name("peeg-accept".into())
                .spawn(move || accept_loop(listener, transport, station, stop, clients, next_id))?,
        );
    }
    Ok(server)
}

impl Server {
    pub fn tcp_addr(&self) -> Option<SocketAddr> {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    pub fn station(&self) -> &Arc<Station> {
        &self.station
    }

    /// Currently connected clients.
    pub fn clients(&self) -> usize {
        self.clients.load(Ordering::SeqCst)
    }

    pub fn is_stopping(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    /// Closes the listeners and every connection.
    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn accept_loop(
    listener: TcpListener,
    transport: Transport,
    station: Arc<Station>,
    stop: Arc<AtomicBool>,
    clients: Arc<AtomicUsize>,
    next_id: Arc<AtomicU64>,
) {
    let mut handlers: Vec<JoinHandle<()>> = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id.fetch_add(1, Ordering::SeqCst);
                log::info!("client {id} connected from {peer}");
                let (station, stop, clients) = (Arc::clone(&station), Arc::clone(&stop), Arc::clone(&clients));
                clients.fetch_add(1, Ordering::SeqCst);
                let spawned = std::thread::Builder::new()
                    .name(format!("peeg-client-{id}"))
                    .spawn(move || {
                        if let Err(e) = run_client(stream, transport, id, &station, &stop) {
                            log::debug!("client {id}: {e}");
                        }
                        clients.fetch_sub(1, Ordering::SeqCst);
                        log::info!("client {id} disconnected");
                    });
                match spawned {
                    Ok(h) => handlers.push(h),
                    Err(e) => log::error!("cannot spawn client thread: {e}"),
                }
                handlers.retain(|h| !h.is_finished());
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(POLL);
            }
        }
    }
    for h in handlers {
        let _ = h.join();
    }
}

enum Item {
    Out(Outbound),
    Pong(Vec<u8>),
}

enum ReadEvent {
    Bytes(Vec<u8>),
    /// A message the transport itself rejects, answered without closing.
    Reject(&'static str),
    Ping(Vec<u8>),
    Idle,
    Eof,
}

trait ByteSource: Send {
    fn read_event(&mut self) -> io::Result<ReadEvent>;
}

trait FrameSink: Send {
    /// Writes one encoded protocol frame completely, or fails.
    fn write_frame(&mut self, bytes: &[u8], stop: &dyn Fn() -> bool) -> io::Result<()>;
    fn pong(&mut self, payload: Vec<u8>, stop: &dyn Fn() -> bool) -> io::Result<()>;
    fn shutdown(&mut self);
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

struct TcpSource(TcpStream);

impl ByteSource for TcpSource {
    fn read_event(&mut self) -> io::Result<ReadEvent> {
        let mut buf = vec![0u8; 64 * 1024];
        match self.0.read(&mut buf) {
            Ok(0) => Ok(ReadEvent::Eof),
            Ok(n) => {
                buf.truncate(n);
                Ok(ReadEvent::Bytes(buf))
            }
            Err(e) if is_timeout(&e) || e.kind() == ErrorKind::Interrupted => Ok(ReadEvent::Idle),
            Err(e) => Err(e),
        }
    }
}

struct TcpSink(TcpStream);

impl FrameSink for TcpSink {
    fn write_frame(&mut self, bytes: &[u8], stop: &dyn Fn() -> bool) -> io::Result<()> {
        let mut off = 0;
        while off < bytes.len() {
            match self.0.write(&bytes[off..]) {
                Ok(0) => return Err(ErrorKind::WriteZero.into()),
                Ok(n) => off += n,
                Err(e) if is_timeout(&e) || e.kind() == ErrorKind::Interrupted => {
                    if stop() {
                        return Err(ErrorKind::ConnectionAborted.into());
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn pong(&mut self, _: Vec<u8>, _: &dyn Fn() -> bool) -> io::Result<()> {
        Ok(())
    }

    fn shutdown(&mut self) {
        let _ = self.0.shutdown(std::net::Shutdown::Both);
    }
}

struct WsSource(FrameSocket<TcpStream>);

fn ws_io(e: tungstenite::Error) -> io::Error {
    match e {
        tungstenite::Error::Io(e) => e,
        other => io::Error::new(ErrorKind::InvalidData, other.to_string()),
    }
}

impl ByteSource for WsSource {
    fn read_event(&mut self) -> io::Result<ReadEvent> {
        let frame = match self.0.read(Some(MAX_BODY_LEN as usize + 64)) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(ReadEvent::Eof),
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) || e.kind() == ErrorKind::Interrupted => {
                return Ok(ReadEvent::Idle)
            }
            Err(e) => return Err(ws_io(e)),
        };
        let mask = frame.header().mask;
        let opcode = frame.header().opcode;
        let mut payload = frame.into_data();
        if let Some(m) = mask {
            payload.iter_mut().enumerate().for_each(|(i, b)| *b ^= m[i % 4]);
        }
        Ok(match opcode {
            OpCode::Data(WsData::Binary) | OpCode::Data(WsData::Continue) => ReadEvent::Bytes(payload),
            OpCode::Data(WsData::Text) => ReadEvent::Reject("text messages are not part of the protocol"),
            OpCode::Data(_) => ReadEvent::Reject("reserved WebSocket opcode"),
            OpCode::Control(WsControl::Ping) => ReadEvent::Ping(payload),
            OpCode::Control(WsControl::Close) => ReadEvent::Eof,
            OpCode::Control(_) => ReadEvent::Idle,
        })
    }
}

struct WsSink(FrameSocket<TcpStream>);

impl WsSink {
    fn send(&mut self, frame: Frame, stop: &dyn Fn() -> bool) -> io::Result<()> {
        match self.0.write(frame) {
            Ok(()) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) || e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(ws_io(e)),
        }
        loop {
            match self.0.flush() {
                Ok(()) => return Ok(()),
                Err(tungstenite::Error::Io(e)) if is_timeout(&e) || e.kind() == ErrorKind::Interrupted => {
                    if stop() {
                        return Err(ErrorKind::ConnectionAborted.into());
                    }
                }
                Err(e) => return Err(ws_io(e)),
            }
        }
    }
}

impl FrameSink for WsSink {
    fn write_frame(&mut self, bytes: &[u8], stop: &dyn Fn() -> bool) -> io::Result<()> {
        self.send(Frame::message(bytes.to_vec(), OpCode::Data(WsData::Binary), true), stop)
    }

    fn pong(&mut self, payload: Vec<u8>, stop: &dyn Fn() -> bool) -> io::Result<()> {
        self.send(Frame::pong(payload), stop)
    }

    fn shutdown(&mut self) {
        let _ = self.0.get_mut().shutdown(std::net::Shutdown::Both);
    }
}

fn ws_handshake(stream: &TcpStream) -> io::Result<()> {
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    stream.set_write_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let check = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == WS_PATH {
            Ok(resp)
        } else {
            let mut e = ErrorResponse::new(Some(format!("use {WS_PATH}")));
            *e.status_mut() = tungstenite::http::StatusCode::NOT_FOUND;
            Err(e)
        }
    };
    // The handshake owns a clone; the protocol runs on raw frame sockets afterwards.
    tungstenite::accept_hdr(stream.try_clone()?, check)
        .map(drop)
        .map_err(|e| io::Error::new(ErrorKind::InvalidData, e.to_string()))
}

fn run_client(
    stream: TcpStream,
    transport: Transport,
    id: u64,
    station: &Arc<Station>,
    stop: &Arc<AtomicBool>,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    if transport == Transport::WebSocket {
        ws_handshake(&stream)?;
    }
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    let (mut source, sink): (Box<dyn ByteSource>, Box<dyn FrameSink>) = match transport {
        Transport::Tcp => (Box::new(TcpSource(stream.try_clone()?)), Box::new(TcpSink(stream))),
        Transport::WebSocket => (
            Box::new(WsSource(FrameSocket::new(stream.try_clone()?))),
            Box::new(WsSink(FrameSocket::new(stream))),
        ),
    };

    let flow = Arc::new(Flow::new(station.check_token(None).is_none()));
    let closed = Arc::new(AtomicBool::new(false));
    let (tx, rx) = crossbeam_channel::bounded::<Item>(OUTBOX);
    let writer = {
        let (station, flow, closed, stop) =
            (Arc::clone(station), Arc::clone(&flow), Arc::clone(&closed), Arc::clone(stop));
        std::thread::Builder::new()
            .name(format!("peeg-writer-{id}"))
            .spawn(move || {
                let mut w = Writer {
                    id,
                    station,
                    flow,
                    rx,
                    sink,
                    closed,
                    stop,
                };
                if let Err(e) = w.run() {
                    log::debug!("client {id} writer: {e}");
                }
                w.closed.store(true, Ordering::SeqCst);
                w.sink.shutdown();
            })?
    };

    let mut conn = Connection::new(id, flow);
    let result = (|| -> io::Result<()> {
        while !stop.load(Ordering::SeqCst) && !closed.load(Ordering::SeqCst) {
            let out = match source.read_event()? {
                ReadEvent::Bytes(b) => conn.on_bytes(&b, station.as_ref()),
                ReadEvent::Reject(why) => vec![Outbound::Send(Message::Err(ErrorMsg::new(
                    None,
                    ErrorCode::Malformed,
                    why,
                )))],
                ReadEvent::Ping(p) => {
                    let _ = tx.send(Item::Pong(p));
                    continue;
                }
                ReadEvent::Idle => continue,
                ReadEvent::Eof => break,
            };
            for o in out {
                let close = o == Outbound::Close;
                if tx.send(Item::Out(o)).is_err() || close {
                    return Ok(());
                }
            }
        }
        Ok(())
    })();
    let _ = tx.send(Item::Out(Outbound::Close));
    drop(tx);
    let _ = writer.join();
    result
}

struct Writer {
    id: u64,
    station: Arc<Station>,
    flow: Arc<Flow>,
    rx: Receiver<Item>,
    sink: Box<dyn FrameSink>,
    closed: Arc<AtomicBool>,
    stop: Arc<AtomicBool>,
}

impl Writer {
    fn send(&mut self, msg: &Message) -> io::Result<()> {
        let bytes = encode(msg).map_err(|e| io::Error::new(ErrorKind::InvalidData, e.to_string()))?;
        let stop = Arc::clone(&self.stop);
        self.sink.write_frame(&bytes, &move || stop.load(Ordering::SeqCst))
    }

    fn hello(&mut self) -> io::Result<()> {
        let authed = self.flow.authenticated.load(Ordering::SeqCst);
        let h = self.station.hello(self.id, authed);
        self.send(&Message::Hello(Hello::Server(h)))
    }

    /// Returns false when the connection should close.
    fn handle(&mut self, item: Item) -> io::Result<bool> {
        match item {
            Item::Out(Outbound::Send(m)) => self.send(&m).map(|_| true),
            Item::Out(Outbound::Close) => Ok(false),
            Item::Pong(p) => {
                let stop = Arc::clone(&self.stop);
                self.sink.pong(p, &move || stop.load(Ordering::SeqCst)).map(|_| true)
            }
        }
    }

    fn run(&mut self) -> io::Result<()> {
        self.hello()?;
        let mut hello_version = self.station.config_version();
        let mut follower: Option<Follower> = None;
        let mut metrics: Option<Receiver<crate::message::Metrics>> = None;
        let mut phase = 0u64;
        let mut last_decimation = 1u16;
        let mut carried_drop = 0u64;
        loop {
            if self.stop.load(Ordering::SeqCst) {
                return Ok(());
            }
            loop {
                match self.rx.try_recv() {
                    Ok(item) => {
                        if !self.handle(item)? {
                            return Ok(());
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => return Ok(()),
                }
            }
            let v = self.station.config_version();
            if v != hello_version {
                hello_version = v;
                self.hello()?;
            }
            if self.flow.wants_metrics() {
                let rx = metrics.get_or_insert_with(|| self.station.metrics_receiver(16)).clone();
                while let Ok(m) = rx.try_recv() {
                    self.send(&Message::Metrics(m))?;
                }
            } else {
                metrics = None;
            }
            if self.flow.wants_data() {
                let cap = self.station.options().client_queue_blocks;
                let f = follower.get_or_insert_with(|| self.station.follow(cap, Overflow::DropOldest));
                if self.flow.has_credit() {
                    let Some(block) = f.recv_timeout(POLL) else { continue };
                    let d = self.flow.decimation.load(Ordering::SeqCst).max(1);
                    if d != last_decimation {
                        last_decimation = d;
                        phase = 0;
                    }
                    let with_codes = self.flow.codes.load(Ordering::SeqCst);
                    let mut data = DataBlock::from_block(&block, d, phase, with_codes);
                    phase = (phase + block.len() as u64) % u64::from(d);
                    carried_drop += block.dropped_before;
                    if data.is_empty() {
                        continue;
                    }
                    data.dropped_before = carried_drop;
                    carried_drop = 0;
                    self.send(&Message::Data(data))?;
                    self.flow.spend_credit();
                    continue;
                }
            } else {
                follower = None;
            }
            match self.rx.recv_timeout(POLL) {
                Ok(item) => {
                    if !self.handle(item)? {
                        return Ok(());
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return Ok(()),
            }
        }
    }
}

