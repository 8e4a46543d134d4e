//! Single-producer sampling loop with independent bounded subscribers.
//!
//! The producer polls the backend one block at a time, converts codes under
//! the register file current at that block boundary, paces emission, and
//! pushes a copy into every subscriber queue. Register writes are queued and
//! applied only between blocks, so no block mixes two configurations.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use peeg_ads1299::{code_to_microvolts, ConversionParams, RegisterFile, CHANNELS};

use crate::backend::{BackendKind, Capabilities, DeviceBackend, Poll};
use crate::block::SampleBlock;
use crate::AcquisitionError;

/// How long `write_register` waits for the producer to reach a block boundary.
const WRITE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Emit blocks at the nominal sample rate using a monotonic clock.
    RealTime,
    /// Emit as fast as the backend delivers.
    Unpaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Samples per channel per block, in `[1, fs]`.
    pub block_len: usize,
    pub pacing: Pacing,
    /// Sequence number of the first block.
    pub first_seq: u64,
    /// Added to every block's nominal `t0_ns`.
    pub t0_offset_ns: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            block_len: 25,
            pacing: Pacing::RealTime,
            first_seq: 0,
            t0_offset_ns: 0,
        }
    }
}

/// What a full subscriber queue does with a new block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overflow {
    /// Discard the oldest queued block and carry its size into the next
    /// delivered block's `dropped_before`.
    DropOldest,
    /// Stall the producer until there is room. Offline conversion only: a
    /// stalled reader stalls every other subscriber.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub addr: u8,
    pub value: u8,
    /// Configuration epoch in force from the next block on.
    pub epoch: u32,
}

/// Per-subscriber sample accounting; `offered == delivered + dropped + backlog`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SubscriberStats {
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub backlog: u64,
    pub backlog_blocks: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineStats {
    /// Samples per channel emitted by the producer.
    pub produced: u64,
    pub produced_blocks: u64,
    /// Largest per-subscriber drop count, so never above `produced`.
    pub dropped: u64,
    /// Queued blocks per live subscriber.
    pub subscriber_lag: Vec<usize>,
    pub subscribers: Vec<SubscriberStats>,
    /// Largest deviation of an inter-block emission interval from nominal.
    pub jitter_ns: u64,
    pub epoch: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineState {
    Idle,
    Running,
    Finished,
}

struct QueueState {
    blocks: VecDeque<SampleBlock>,
    ended: bool,
    detached: bool,
    stats: SubscriberStats,
}

struct Queue {
    capacity: usize,
    overflow: Overflow,
    state: Mutex<QueueState>,
    ready: Condvar,
    space: Condvar,
}

impl Queue {
    fn lock(&self) -> MutexGuard<'_, QueueState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Returns false once the subscriber has gone away.
    fn push(&self, mut block: SampleBlock) -> bool {
        let mut st = self.lock();
        if self.overflow == Overflow::Block {
            while st.blocks.len() >= self.capacity && !st.detached {
                st = self.space.wait(st).unwrap_or_else(|e| e.into_inner());
            }
        }
        if st.detached {
            return false;
        }
        let n = block.len() as u64;
        st.stats.offered += n;
        if st.blocks.len() >= self.capacity {
            if let Some(old) = st.blocks.pop_front() {
                let lost = old.len() as u64;
                st.stats.dropped += lost;
                st.stats.backlog -= lost;
                let gap = lost + old.dropped_before;
                match st.blocks.front_mut() {
                    Some(next) => next.dropped_before += gap,
                    None => block.dropped_before += gap,
                }
            }
        }
        st.stats.backlog += n;
        st.blocks.push_back(block);
        self.ready.notify_one();
        true
    }

    fn end(&self) {
        self.lock().ended = true;
        self.ready.notify_all();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecvError {
    Timeout,
    Ended,
}

/// One consumer's view of the stream. Dropping it detaches the queue.
pub struct Subscription {
    queue: Arc<Queue>,
}

impl Subscription {
    fn take(&self, st: &mut QueueState) -> Option<SampleBlock> {
        let block = st.blocks.pop_front()?;
        let n = block.len() as u64;
        st.stats.delivered += n;
        st.stats.backlog -= n;
        self.queue.space.notify_one();
        Some(block)
    }

    /// Next block, waiting as needed; `None` once the stream ended and the queue is drained.
    pub fn recv(&self) -> Option<SampleBlock> {
        let mut st = self.queue.lock();
        loop {
            if let Some(b) = self.take(&mut st) {
                return Some(b);
            }
            if st.ended {
                return None;
            }
            st = self.queue.ready.wait(st).unwrap_or_else(|e| e.into_inner());
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<SampleBlock, RecvError> {
        let deadline = Instant::now() + timeout;
        let mut st = self.queue.lock();
        loop {
            if let Some(b) = self.take(&mut st) {
                return Ok(b);
            }
            if st.ended {
                return Err(RecvError::Ended);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(RecvError::Timeout);
            }
            st = self
                .queue
                .ready
                .wait_timeout(st, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    pub fn try_recv(&self) -> Result<SampleBlock, RecvError> {
        let mut st = self.queue.lock();
        match self.take(&mut st) {
            Some(b) => Ok(b),
            None if st.ended => Err(RecvError::Ended),
            None => Err(RecvError::Timeout),
        }
    }

    pub fn stats(&self) -> SubscriberStats {
        let st = self.queue.lock();
        SubscriberStats {
            backlog_blocks: st.blocks.len(),
            ..st.stats
        }
    }

    pub fn capacity(&self) -> usize {
        self.queue.capacity
    }
}

impl Iterator for Subscription {
    type Item = SampleBlock;

    fn next(&mut self) -> Option<SampleBlock> {
        self.recv()
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.queue.lock().detached = true;
        self.queue.space.notify_all();
    }
}

struct Subscribers {
    queues: Vec<Arc<Queue>>,
    finished: bool,
}

struct Shared {
    state: Mutex<PipelineState>,
    closed: AtomicBool,
    subscribers: Mutex<Subscribers>,
    rf: Mutex<RegisterFile>,
    epoch: AtomicU32,
    produced: AtomicU64,
    produced_blocks: AtomicU64,
    jitter_ns: AtomicU64,
    error: Mutex<Option<String>>,
}

impl Shared {
    fn subscribers(&self) -> MutexGuard<'_, Subscribers> {
        self.subscribers.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn rf(&self) -> RegisterFile {
        *self.rf.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn set_state(&self, s: PipelineState) {
        *self.state.lock().unwrap_or_else(|e| e.into_inner()) = s;
    }

    fn state(&self) -> PipelineState {
        *self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

enum Cmd {
    Write {
        addr: u8,
        value: u8,
        reply: Sender<Result<Ack, AcquisitionError>>,
    },
    Stop,
}

/// Handle to one acquisition stream. Idle until [`Pipeline::start`].
pub struct Pipeline {
    shared: Arc<Shared>,
    backend: Mutex<Option<Box<dyn DeviceBackend>>>,
    kind: BackendKind,
    capabilities: Capabilities,
    vref: f64,
    config: PipelineConfig,
    commands: Sender<Cmd>,
    command_rx: Receiver<Cmd>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl Pipeline {
    pub fn new(
        backend: Box<dyn DeviceBackend>,
        rf: RegisterFile,
        config: PipelineConfig,
    ) -> Result<Self, AcquisitionError> {
        Self::with_vref(backend, rf, config, peeg_ads1299::DEFAULT_VREF)
    }

    pub fn with_vref(
        backend: Box<dyn DeviceBackend>,
        rf: RegisterFile,
        config: PipelineConfig,
        vref: f64,
    ) -> Result<Self, AcquisitionError> {
        let fs = rf.sample_rate() as usize;
        if config.block_len == 0 || config.block_len > fs {
            return Err(AcquisitionError::InvalidBlockLen {
                block_len: config.block_len,
                reason: format!("must be in [1, {fs}]"),
            });
        }
        if ConversionParams::new(vref, peeg_ads1299::Gain::X1).is_none() {
            return Err(AcquisitionError::InvalidConfig(format!("vref {vref} must be positive")));
        }
        let (commands, command_rx) = crossbeam_channel::unbounded();
        Ok(Self {
            shared: Arc::new(Shared {
                state: Mutex::new(PipelineState::Idle),
                closed: AtomicBool::new(false),
                subscribers: Mutex::new(Subscribers {
                    queues: Vec::new(),
                    finished: false,
                }),
                rf: Mutex::new(rf),
                epoch: AtomicU32::new(0),
                produced: AtomicU64::new(0),
                produced_blocks: AtomicU64::new(0),
                jitter_ns: AtomicU64::new(0),
                error: Mutex::new(None),
            }),
            kind: backend.kind(),
            capabilities: backend.capabilities(),
            backend: Mutex::new(Some(backend)),
            vref,
            config,
            commands,
            command_rx,
            thread: Mutex::new(None),
        })
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    pub fn config(&self) -> PipelineConfig {
        self.config
    }

    pub fn state(&self) -> PipelineState {
        self.shared.state()
    }

    pub fn register_file(&self) -> RegisterFile {
        self.shared.rf()
    }

    pub fn epoch(&self) -> u32 {
        self.shared.epoch.load(Ordering::SeqCst)
    }

    /// Backend failure that ended the stream, if any.
    pub fn error(&self) -> Option<String> {
        self.shared.error.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Opens the backend and launches the producer thread.
    pub fn start(&self) -> Result<(), AcquisitionError> {
        if self.shared.closed.load(Ordering::SeqCst) {
            return Err(AcquisitionError::PipelineClosed);
        }
        let mut state = self.shared.state.lock().unwrap_or_else(|e| e.into_inner());
        if *state != PipelineState::Idle {
            return Err(AcquisitionError::AlreadyRunning);
        }
        let mut backend = self
            .backend
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .take()
            .ok_or(AcquisitionError::AlreadyRunning)?;
        let rf = match backend.open(&self.shared.rf()) {
            Ok(rf) => rf,
            Err(e) => {
                *self.backend.lock().unwrap_or_else(|e| e.into_inner()) = Some(backend);
                return Err(e);
            }
        };
        if self.config.block_len > rf.sample_rate() as usize {
            return Err(AcquisitionError::InvalidBlockLen {
                block_len: self.config.block_len,
                reason: format!("must be in [1, {}]", rf.sample_rate()),
            });
        }
        *self.shared.rf.lock().unwrap_or_else(|e| e.into_inner()) = rf;
        *state = PipelineState::Running;
        drop(state);

        let producer = Producer {
            shared: Arc::clone(&self.shared),
            backend,
            commands: self.command_rx.clone(),
            config: self.config,
            capabilities: self.capabilities,
            vref: self.vref,
            pending: Vec::new(),
        };
        let handle = std::thread::Builder::new()
            .name("peeg-producer".into())
            .spawn(move || producer.run())?;
        *self.thread.lock().unwrap_or_else(|e| e.into_inner()) = Some(handle);
        Ok(())
    }

    pub fn subscribe(&self, capacity: usize) -> Result<Subscription, AcquisitionError> {
        self.subscribe_with(capacity, Overflow::DropOldest)
    }

    pub fn subscribe_with(&self, capacity: usize, overflow: Overflow) -> Result<Subscription, AcquisitionError> {
        if self.shared.closed.load(Ordering::SeqCst) {
            return Err(AcquisitionError::PipelineClosed);
        }
        if capacity == 0 {
            return Err(AcquisitionError::InvalidConfig("subscriber capacity must be positive".into()));
        }
        let queue = Arc::new(Queue {
            capacity,
            overflow,
            state: Mutex::new(QueueState {
                blocks: VecDeque::with_capacity(capacity.min(1024)),
                ended: false,
                detached: false,
                stats: SubscriberStats::default(),
            }),
            ready: Condvar::new(),
            space: Condvar::new(),
        });
        let mut subs = self.shared.subscribers();
        if subs.finished {
            queue.lock().ended = true;
        } else {
            subs.queues.push(Arc::clone(&queue));
        }
        Ok(Subscription { queue })
    }

    /// Validates and applies one register write.
    ///
    /// While running, the write is applied at the next block boundary and this
    /// call waits for it. Before start it only updates the pending configuration.
    pub fn write_register(&self, addr: u8, value: u8) -> Result<Ack, AcquisitionError> {
        if !self.capabilities.register_writes {
            return Err(AcquisitionError::Unsupported(format!(
                "{} backend does not accept register writes",
                self.kind.as_str()
            )));
        }
        let current = self.shared.rf();
        let next = current.write_register(addr, value)?;
        check_rate_change(&current, &next, self.capabilities)?;
        match self.shared.state() {
            PipelineState::Idle => {
                *self.shared.rf.lock().unwrap_or_else(|e| e.into_inner()) = next;
                let epoch = self.shared.epoch.fetch_add(1, Ordering::SeqCst) + 1;
                Ok(Ack { addr, value, epoch })
            }
            PipelineState::Finished => Err(AcquisitionError::NotRunning),
            PipelineState::Running => {
                let (reply, rx) = crossbeam_channel::bounded(1);
                self.commands
                    .send(Cmd::Write { addr, value, reply })
                    .map_err(|_| AcquisitionError::NotRunning)?;
                match rx.recv_timeout(WRITE_TIMEOUT) {
                    Ok(result) => result,
                    Err(RecvTimeoutError::Timeout) => Err(AcquisitionError::Backend(
                        "producer did not reach a block boundary in time".into(),
                    )),
                    Err(RecvTimeoutError::Disconnected) => Err(AcquisitionError::NotRunning),
                }
            }
        }
    }

    pub fn read_register(&self, addr: u8) -> Result<u8, AcquisitionError> {
        Ok(self.shared.rf().read_register(addr)?)
    }

    /// Asks the producer to stop at the next block boundary and waits for it.
    pub fn stop(&self) {
        let _ = self.commands.send(Cmd::Stop);
        self.join();
    }

    /// Waits for the stream to end by itself (end of scenario or recording).
    pub fn wait(&self) -> Result<(), AcquisitionError> {
        self.join();
        match self.error() {
            Some(e) => Err(AcquisitionError::Backend(e)),
            None => Ok(()),
        }
    }

    /// Stops the stream and refuses further subscriptions.
    pub fn close(&self) {
        self.shared.closed.store(true, Ordering::SeqCst);
        self.stop();
        finish(&self.shared);
    }

    fn join(&self) {
        let handle = self.thread.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(h) = handle {
            if h.join().is_err() {
                log::error!("producer thread panicked");
                finish(&self.shared);
            }
        }
    }

    pub fn stats(&self) -> PipelineStats {
        let subs = self.shared.subscribers();
        let mut subscribers = Vec::new();
        for q in &subs.queues {
            let st = q.lock();
            if !st.detached {
                let n = st.blocks.len();
                subscribers.push((SubscriberStats { backlog_blocks: n, ..st.stats }, n));
            }
        }
        drop(subs);
        PipelineStats {
            produced: self.shared.produced.load(Ordering::SeqCst),
            produced_blocks: self.shared.produced_blocks.load(Ordering::SeqCst),
            dropped: subscribers.iter().map(|(s, _)| s.dropped).max().unwrap_or(0),
            subscriber_lag: subscribers.iter().map(|&(_, n)| n).collect(),
            subscribers: subscribers.into_iter().map(|(s, _)| s).collect(),
            jitter_ns: self.shared.jitter_ns.load(Ordering::SeqCst),
            epoch: self.epoch(),
        }
    }
}

impl Drop for Pipeline {
    fn drop(&mut self) {
        self.stop();
    }
}

fn check_rate_change(
    current: &RegisterFile,
    next: &RegisterFile,
    caps: Capabilities,
) -> Result<(), AcquisitionError> {
    if next.data_rate() != current.data_rate() && !caps.mid_stream_rate_change {
        return Err(AcquisitionError::Unsupported(
            "backend cannot change the data rate mid-stream".into(),
        ));
    }
    Ok(())
}

fn finish(shared: &Shared) {
    let mut subs = shared.subscribers();
    subs.finished = true;
    for q in subs.queues.drain(..) {
        q.end();
    }
    drop(subs);
    shared.set_state(PipelineState::Finished);
}

fn wall_clock_ns() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

struct Producer {
    shared: Arc<Shared>,
    backend: Box<dyn DeviceBackend>,
    commands: Receiver<Cmd>,
    config: PipelineConfig,
    capabilities: Capabilities,
    vref: f64,
    pending: Vec<Cmd>,
}

impl Producer {
    fn run(mut self) {
        if let Err(e) = self.stream() {
            log::error!("acquisition stopped: {e}");
            *self.shared.error.lock().unwrap_or_else(|e| e.into_inner()) = Some(e.to_string());
        }
        finish(&self.shared);
    }

    /// Applies queued commands; returns true when asked to stop.
    fn drain_commands(&mut self) -> bool {
        let mut queued: Vec<Cmd> = std::mem::take(&mut self.pending);
        queued.extend(self.commands.try_iter());
        let mut stop = false;
        for cmd in queued {
            match cmd {
                Cmd::Stop => stop = true,
                Cmd::Write { addr, value, reply } => {
                    let _ = reply.send(self.apply_write(addr, value));
                }
            }
        }
        stop
    }

    fn apply_write(&mut self, addr: u8, value: u8) -> Result<Ack, AcquisitionError> {
        let current = self.shared.rf();
        let next = current.write_register(addr, value)?;
        check_rate_change(&current, &next, self.capabilities)?;
        self.backend.write_register(addr, value, &next)?;
        *self.shared.rf.lock().unwrap_or_else(|e| e.into_inner()) = next;
        let epoch = self.shared.epoch.fetch_add(1, Ordering::SeqCst) + 1;
        Ok(Ack { addr, value, epoch })
    }

    /// Sleeps until `deadline`, stashing commands that arrive meanwhile.
    fn sleep_until(&mut self, deadline: Instant) {
        loop {
            let now = Instant::now();
            if now >= deadline {
                return;
            }
            match self.commands.recv_timeout(deadline - now) {
                Ok(cmd) => self.pending.push(cmd),
                Err(RecvTimeoutError::Timeout) => return,
                Err(RecvTimeoutError::Disconnected) => {
                    std::thread::sleep(deadline.saturating_duration_since(Instant::now()));
                    return;
                }
            }
        }
    }

    fn stream(&mut self) -> Result<(), AcquisitionError> {
        let block_len = self.config.block_len;
        let mut seq = self.config.first_seq;
        let mut samples: u64 = 0;
        let mut frames: Vec<[i32; CHANNELS]> = Vec::with_capacity(block_len);
        let started = Instant::now();
        let mut last_emit: Option<(Instant, u64)> = None;
        let paced = self.config.pacing == Pacing::RealTime && !self.capabilities.self_paced;
        let measure_jitter = self.config.pacing == Pacing::RealTime || self.capabilities.self_paced;
        let mut ended = false;

        while !ended {
            if self.drain_commands() {
                break;
            }
            let rf = self.shared.rf();
            let epoch = self.shared.epoch.load(Ordering::SeqCst);
            let fs = rf.sample_rate();

            frames.clear();
            let mut next_config = None;
            while frames.len() < block_len {
                match self.backend.poll()? {
                    Poll::Frame(f) => frames.push(f.codes),
                    Poll::Config(new_rf) => {
                        next_config = Some(new_rf);
                        break;
                    }
                    Poll::End => {
                        ended = true;
                        break;
                    }
                }
            }

            if !frames.is_empty() {
                let block = self.convert(&frames, &rf, epoch, seq, samples);
                let nominal_end_ns = (u128::from(samples + frames.len() as u64) * 1_000_000_000
                    / u128::from(fs)) as u64;
                if paced {
                    self.sleep_until(started + Duration::from_nanos(nominal_end_ns));
                }
                let now = Instant::now();
                if measure_jitter {
                    if let Some((prev, prev_nominal)) = last_emit {
                        let actual = now.duration_since(prev).as_nanos() as i128;
                        let nominal = i128::from(nominal_end_ns - prev_nominal);
                        let dev = (actual - nominal).unsigned_abs() as u64;
                        self.shared.jitter_ns.fetch_max(dev, Ordering::SeqCst);
                    }
                }
                last_emit = Some((now, nominal_end_ns));
                samples += frames.len() as u64;
                seq += 1;
                self.emit(block);
            }

            if let Some(new_rf) = next_config {
                let changed = new_rf != rf;
                *self.shared.rf.lock().unwrap_or_else(|e| e.into_inner()) = new_rf;
                if changed && samples > 0 {
                    self.shared.epoch.fetch_add(1, Ordering::SeqCst);
                }
            }
        }
        // refuse writes that arrived after the last boundary
        self.pending.clear();
        Ok(())
    }

    fn convert(
        &self,
        frames: &[[i32; CHANNELS]],
        rf: &RegisterFile,
        epoch: u32,
        seq: u64,
        samples_before: u64,
    ) -> SampleBlock {
        let n = frames.len();
        let fs = rf.sample_rate();
        let gains = rf.gains();
        let mut data = vec![0.0; n * CHANNELS];
        let mut codes = vec![0i32; n * CHANNELS];
        for c in 0..CHANNELS {
            let params = ConversionParams::new(self.vref, gains[c]).expect("vref checked at construction");
            for (i, frame) in frames.iter().enumerate() {
                codes[c * n + i] = frame[c];
                data[c * n + i] = code_to_microvolts(frame[c], &params);
            }
        }
        SampleBlock {
            seq,
            t0_ns: self.config.t0_offset_ns
                + (u128::from(samples_before) * 1_000_000_000 / u128::from(fs)) as u64,
            host_time_ns: wall_clock_ns(),
            fs,
            epoch,
            gains,
            vref: self.vref,
            dropped_before: 0,
            data,
            codes,
        }
    }

    fn emit(&self, block: SampleBlock) {
        let n = block.len() as u64;
        let queues: Vec<Arc<Queue>> = self.shared.subscribers().queues.clone();
        let mut detached = false;
        for q in &queues {
            detached |= !q.push(block.clone());
        }
        // counters move after delivery so stats never show samples no queue has seen
        self.shared.produced.fetch_add(n, Ordering::SeqCst);
        self.shared.produced_blocks.fetch_add(1, Ordering::SeqCst);
        if detached {
            self.shared
                .subscribers()
                .queues
                .retain(|q| !q.lock().detached);
        }
    }
}
