//! The station: one swappable pipeline, its metadata, and the operations
//! connections invoke on it.

use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, Weak};
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};
use peeg_acquisition::{AcquisitionError, Overflow, Pipeline, PipelineState, RecvError, SampleBlock, Subscription};
use peeg_ads1299::RegisterFile;
use peeg_dsp::DetectorConfig;
use peeg_synth::Scenario;
use serde_json::Value;

use crate::codec::PROTOCOL_VERSION;
use crate::connection::{CmdError, Control, DEFAULT_CREDIT};
use crate::message::{ErrorCode, Metrics, ServerHello};
use crate::metrics::MetricsEngine;

/// Receives ANNOTATE commands while a recording is active.
pub trait AnnotationSink: Send + Sync {
    fn annotate(&self, time_s: f64, text: &str) -> Result<(), String>;
}

impl<W: Write + Send + 'static> AnnotationSink for peeg_session::Annotator<W> {
    fn annotate(&self, time_s: f64, text: &str) -> Result<(), String> {
        peeg_session::Annotator::annotate(self, time_s, text).map_err(|e| e.to_string())
    }
}

/// What a rebuild callback gets: the scenario to switch to (`None` to
/// restart the current one) and where numbering continues.
#[derive(Debug, Clone)]
pub struct RebuildRequest {
    pub scenario: Option<Scenario>,
    pub register_file: RegisterFile,
    pub first_seq: u64,
    pub t0_offset_ns: u64,
}

/// Builds a fresh pipeline and its channel labels.
pub type Rebuild = Box<dyn Fn(RebuildRequest) -> Result<(Pipeline, Vec<String>), String> + Send + Sync>;

#[derive(Debug, Clone)]
pub struct StationOptions {
    /// Required in the client HELLO when set.
    pub token: Option<String>,
    /// Per-client block queue; overflow drops the oldest block.
    pub client_queue_blocks: usize,
    pub server_name: String,
    pub detectors: DetectorConfig,
}

impl Default for StationOptions {
    fn default() -> Self {
        Self {
            token: None,
            client_queue_blocks: 256,
            server_name: format!("peeg-station/{}", env!("CARGO_PKG_VERSION")),
            detectors: DetectorConfig::default(),
        }
    }
}

impl StationOptions {
    /// Reads the token from `PEEG_TOKEN`; an empty value means no token.
    pub fn from_env() -> Self {
        Self {
            token: std::env::var("PEEG_TOKEN").ok().filter(|t| !t.is_empty()),
            ..Self::default()
        }
    }
}

struct Slot {
    capacity: usize,
    overflow: Overflow,
    pending: Mutex<Option<Subscription>>,
}

pub struct Station {
    pipeline: RwLock<Arc<Pipeline>>,
    labels: RwLock<Vec<String>>,
    generation: AtomicU64,
    /// Bumped on every change a HELLO would show.
    config_version: AtomicU64,
    rebuild: Option<Rebuild>,
    annotations: RwLock<Option<Arc<dyn AnnotationSink>>>,
    followers: Mutex<Vec<Weak<Slot>>>,
    metric_sinks: Mutex<Vec<Sender<Metrics>>>,
    /// Serializes pipeline mutations so effects land in ACK order.
    control: Mutex<()>,
    options: StationOptions,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn map_err(e: AcquisitionError) -> CmdError {
    let code = match &e {
        AcquisitionError::Register(_) => ErrorCode::InvalidReg,
        AcquisitionError::Unsupported(_) | AcquisitionError::RateMismatch { .. } => ErrorCode::Unsupported,
        AcquisitionError::NotRunning | AcquisitionError::PipelineClosed => ErrorCode::NotRunning,
        _ => ErrorCode::Internal,
    };
    CmdError::new(code, e.to_string())
}

fn state_name(s: PipelineState) -> &'static str {
    match s {
        PipelineState::Idle => "idle",
        PipelineState::Running => "running",
        PipelineState::Finished => "finished",
    }
}

impl Station {
    pub fn new(pipeline: Pipeline, labels: Vec<String>, options: StationOptions) -> Self {
        Self {
            pipeline: RwLock::new(Arc::new(pipeline)),
            labels: RwLock::new(labels),
            generation: AtomicU64::new(0),
            config_version: AtomicU64::new(0),
            rebuild: None,
            annotations: RwLock::new(None),
            followers: Mutex::new(Vec::new()),
            metric_sinks: Mutex::new(Vec::new()),
            control: Mutex::new(()),
            options,
        }
    }

    /// Enables SET_SCENARIO and START after the stream has ended.
    pub fn with_rebuild(mut self, rebuild: Rebuild) -> Self {
        self.rebuild = Some(rebuild);
        self
    }

    pub fn set_annotation_sink(&self, sink: Option<Arc<dyn AnnotationSink>>) {
        *self.annotations.write().unwrap_or_else(|e| e.into_inner()) = sink;
    }

    pub fn options(&self) -> &StationOptions {
        &self.options
    }

    pub fn pipeline(&self) -> Arc<Pipeline> {
        Arc::clone(&self.pipeline.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn labels(&self) -> Vec<String> {
        self.labels.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn generation(&self) -> u64 {
        self.generation.load(Ordering::SeqCst)
    }

    pub fn config_version(&self) -> u64 {
        self.config_version.load(Ordering::SeqCst)
    }

    fn bump(&self) {
        self.config_version.fetch_add(1, Ordering::SeqCst);
    }

    /// A block source that survives pipeline swaps without losing blocks of
    /// the new pipeline.
    pub fn follow(self: &Arc<Self>, capacity: usize, overflow: Overflow) -> Follower {
        let slot = Arc::new(Slot {
            capacity,
            overflow,
            pending: Mutex::new(None),
        });
        let mut followers = lock(&self.followers);
        followers.retain(|w| w.strong_count() > 0);
        let current = self.pipeline().subscribe_with(capacity, overflow).ok();
        followers.push(Arc::downgrade(&slot));
        Follower {
            slot,
            current,
        }
    }

    pub fn metrics_receiver(&self, capacity: usize) -> Receiver<Metrics> {
        let (tx, rx) = crossbeam_channel::bounded(capacity);
        lock(&self.metric_sinks).push(tx);
        rx
    }

    /// Computes METRICS until `stop` is set; each receiver gets every summary
    /// unless its queue is full.
    pub fn run_metrics(self: &Arc<Self>, stop: &AtomicBool) {
        let mut follower = self.follow(64, Overflow::DropOldest);
        let mut engine = MetricsEngine::new(self.options.detectors.clone());
        while !stop.load(Ordering::SeqCst) {
            let Some(block) = follower.recv_timeout(Duration::from_millis(50)) else {
                continue;
            };
            if let Some(m) = engine.push(&block) {
                lock(&self.metric_sinks).retain(|tx| match tx.try_send(m.clone()) {
                    Ok(()) | Err(crossbeam_channel::TrySendError::Full(_)) => true,
                    Err(crossbeam_channel::TrySendError::Disconnected(_)) => false,
                });
            }
        }
    }

    fn now_s(&self) -> f64 {
        let p = self.pipeline();
        let fs = f64::from(p.register_file().sample_rate());
        p.config().t0_offset_ns as f64 / 1e9 + p.stats().produced as f64 / fs
    }

    /// Replaces the pipeline, carrying sequence numbers and stream time forward.
    fn swap(&self, scenario: Option<Scenario>) -> Result<(), CmdError> {
        let rebuild = self
            .rebuild
            .as_ref()
            .ok_or_else(|| CmdError::new(ErrorCode::Unsupported, "this backend cannot be rebuilt"))?;
        let old = self.pipeline();
        let was_running = old.state() == PipelineState::Running;
        if was_running {
            old.stop();
        }
        let stats = old.stats();
        let cfg = old.config();
        let rf = old.register_file();
        let fs = u64::from(rf.sample_rate());
        let request = RebuildRequest {
            scenario,
            register_file: rf,
            first_seq: cfg.first_seq + stats.produced_blocks,
            t0_offset_ns: cfg.t0_offset_ns + stats.produced * 1_000_000_000 / fs,
        };
        let (next, labels) = rebuild(request).map_err(|e| CmdError::new(ErrorCode::Malformed, e))?;
        let next = Arc::new(next);
        {
            let mut followers = lock(&self.followers);
            followers.retain(|w| w.strong_count() > 0);
            for slot in followers.iter().filter_map(Weak::upgrade) {
                *lock(&slot.pending) = next.subscribe_with(slot.capacity, slot.overflow).ok();
            }
            *self.pipeline.write().unwrap_or_else(|e| e.into_inner()) = Arc::clone(&next);
            *self.labels.write().unwrap_or_else(|e| e.into_inner()) = labels;
            self.generation.fetch_add(1, Ordering::SeqCst);
        }
        old.close();
        let started = if was_running { next.start().map_err(map_err) } else { Ok(()) };
        self.bump();
        started
    }
}

impl Control for Station {
    fn hello(&self, client_id: u64, authenticated: bool) -> ServerHello {
        let p = self.pipeline();
        let rf = p.register_file();
        ServerHello {
            server: self.options.server_name.clone(),
            protocol: PROTOCOL_VERSION,
            client_id,
            fs: rf.sample_rate(),
            channels: self.labels(),
            gains: rf.gains().iter().map(|g| g.value()).collect(),
            block_len: p.config().block_len as u32,
            backend: p.kind().as_str().to_string(),
            state: state_name(p.state()).to_string(),
            epoch: p.epoch(),
            auth_required: self.options.token.is_some(),
            authenticated,
            default_credit: DEFAULT_CREDIT,
        }
    }

    fn check_token(&self, token: Option<&str>) -> Option<bool> {
        self.options.token.as_deref().map(|t| token == Some(t))
    }

    fn start(&self) -> Result<Option<String>, CmdError> {
        let _g = lock(&self.control);
        let p = self.pipeline();
        let result = match p.state() {
            PipelineState::Running => Ok(Some("already running".to_string())),
            PipelineState::Idle => p.start().map(|_| None).map_err(map_err),
            PipelineState::Finished => {
                if self.rebuild.is_none() {
                    return Err(CmdError::new(ErrorCode::NotRunning, "stream has ended"));
                }
                self.swap(None)?;
                self.pipeline().start().map(|_| None).map_err(map_err)
            }
        };
        self.bump();
        result
    }

    fn stop(&self) -> Result<(), CmdError> {
        let _g = lock(&self.control);
        let p = self.pipeline();
        if p.state() != PipelineState::Running {
            return Err(CmdError::new(ErrorCode::NotRunning, "stream is not running"));
        }
        p.stop();
        self.bump();
        Ok(())
    }

    fn read_register(&self, addr: u8) -> Result<u8, CmdError> {
        self.pipeline().read_register(addr).map_err(map_err)
    }

    fn write_register(&self, addr: u8, value: u8) -> Result<u32, CmdError> {
        let _g = lock(&self.control);
        let ack = self.pipeline().write_register(addr, value).map_err(map_err)?;
        self.bump();
        Ok(ack.epoch)
    }

    fn annotate(&self, time_s: Option<f64>, text: &str) -> Result<Option<String>, CmdError> {
        let sink = self.annotations.read().unwrap_or_else(|e| e.into_inner()).clone();
        match sink {
            Some(sink) => {
                let t = time_s.unwrap_or_else(|| self.now_s());
                sink.annotate(t, text).map_err(|e| CmdError::new(ErrorCode::Internal, e))?;
                Ok(None)
            }
            None => Ok(Some("not recording; annotation discarded".to_string())),
        }
    }

    fn set_scenario(&self, scenario: &Value) -> Result<(), CmdError> {
        let _g = lock(&self.control);
        if self.annotations.read().unwrap_or_else(|e| e.into_inner()).is_some() {
            return Err(CmdError::new(ErrorCode::Unsupported, "cannot switch scenario while recording"));
        }
        if self.rebuild.is_none() {
            return Err(CmdError::new(ErrorCode::Unsupported, "backend has no scenarios"));
        }
        let s = parse_scenario(scenario).map_err(|e| CmdError::new(ErrorCode::Malformed, e))?;
        self.swap(Some(s))
    }
}

/// A shortcut name (`fig6`, `ecg:72`, ...) or a full scenario object.
pub fn parse_scenario(v: &Value) -> Result<Scenario, String> {
    match v {
        Value::String(name) => peeg_synth::named_scenario(name).ok_or_else(|| format!("unknown scenario {name:?}")),
        Value::Object(_) => Scenario::from_json(&v.to_string()).map_err(|e| e.to_string()),
        _ => Err("scenario must be a name or an object".to_string()),
    }
}

/// Receives blocks from whatever pipeline the station currently runs.
pub struct Follower {
    slot: Arc<Slot>,
    current: Option<Subscription>,
}

impl Follower {
    /// `None` on timeout or while no stream is producing.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Option<SampleBlock> {
        for _ in 0..2 {
            if self.current.is_none() {
                self.current = lock(&self.slot.pending).take();
            }
            let Some(sub) = &self.current else { break };
            match sub.recv_timeout(timeout) {
                Ok(b) => return Some(b),
                Err(RecvError::Timeout) => return None,
                Err(RecvError::Ended) => {
                    let next = lock(&self.slot.pending).take();
                    match next {
                        Some(n) => self.current = Some(n),
                        None => break,
                    }
                }
            }
        }
        std::thread::sleep(timeout);
        None
    }
}
