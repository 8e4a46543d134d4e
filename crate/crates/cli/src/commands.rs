use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Once};
use std::time::{Duration, Instant};

use peeg_acquisition::{
    Overflow, Pacing, Pipeline, PipelineConfig, PipelineState, RecvError, ReplayBackend, SimulatorBackend,
};
use peeg_ads1299::{Gain, RegisterFile, REGISTER_COUNT};
use peeg_dsp::{DetectorConfig, EyeState};
use peeg_session::{export_csv, recover_session, Recorder, SessionWriter};
use peeg_stream::{
    serve, Client, CmdOp, Metrics, MetricsEngine, RebuildRequest, ServerConfig, Station, StationOptions,
};
use serde::Serialize;
use serde_json::json;

use crate::analyze;
use crate::args::*;
use crate::backend::{build, load_scenario, parse_backend, pipeline_config, register_file_for, session_header, BackendSpec};
use crate::error::CliError;

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

/// Ctrl-C ends long-running commands cleanly instead of killing the process.
fn install_interrupt() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        if let Err(e) = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst)) {
            log::warn!("cannot install the interrupt handler: {e}");
        }
    });
}

fn interrupted() -> bool {
    INTERRUPTED.load(Ordering::SeqCst)
}

pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    pub format: Format,
}

impl Io<'_> {
    /// Writes a report: the text form, or one line of JSON.
    fn emit<T: Serialize>(&mut self, value: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
        match self.format {
            Format::Text => self.out.write_all(text().as_bytes())?,
            Format::Json => {
                serde_json::to_writer(&mut *self.out, value).map_err(|e| CliError::from(std::io::Error::from(e)))?;
                self.out.write_all(b"\n")?;
            }
        }
        self.out.flush()?;
        Ok(())
    }

    fn note(&mut self, msg: &str) {
        let _ = writeln!(self.err, "{msg}");
    }
}

pub fn dispatch(cmd: Command, io: &mut Io) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a, io),
        Command::Record(a) => record(a, io),
        Command::Replay(a) => replay(a, io),
        Command::Serve(a) => serve_cmd(a, io),
        Command::Analyze { kind } => analyze_cmd(kind, io),
        Command::Regs { op } => regs(op, io),
        Command::Export { kind } => export(kind, io),
    }
}

fn check_block_len(n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("block length must be at least 1".into()));
    }
    Ok(())
}

fn check_out_path(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(CliError::Io(format!("{}: directory does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct Written<'a> {
    path: &'a Path,
    blocks: u64,
    samples: u64,
    duration_s: f64,
    fs: u32,
    dropped: u64,
}

fn written_text(w: &Written) -> String {
    format!(
        "wrote {}: {} blocks, {} samples per channel, {:.3} s at {} SPS, {} dropped\n",
        w.path.display(),
        w.blocks,
        w.samples,
        w.duration_s,
        w.fs,
        w.dropped
    )
}

fn simulate(a: SimulateArgs, io: &mut Io) -> Result<(), CliError> {
    check_block_len(a.block_len)?;
    check_out_path(&a.out)?;
    let mut s = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        s = s.with_seed(seed);
    }
    if let Some(d) = a.duration {
        s.duration_s = d;
    }
    let spec = BackendSpec::Sim(s);
    let built = build(&spec, None, pipeline_config(a.block_len, false))?;
    let header = session_header(&built);
    let recorder = Recorder::start(&built.pipeline, SessionWriter::create(&a.out, header)?)?;
    built.pipeline.start()?;
    let waited = built.pipeline.wait();
    built.pipeline.close();
    recorder.finish()?.flush()?;
    waited?;
    let stats = built.pipeline.stats();
    let fs = built.pipeline.register_file().sample_rate();
    let w = Written {
        path: &a.out,
        blocks: stats.produced_blocks,
        samples: stats.produced,
        duration_s: stats.produced as f64 / f64::from(fs),
        fs,
        dropped: stats.dropped,
    };
    io.emit(&w, || written_text(&w))
}

#[derive(Serialize)]
struct MetricsLine<'a> {
    event: &'static str,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

fn metrics_text(m: &Metrics, label: &str) -> String {
    let alpha = m
        .alpha_uv2
        .first()
        .map_or("-".to_string(), |p| format!("{p:.2}"));
    format!(
        "t={:>8.2}s alpha[{label}]={alpha} uV2 blinks={} chews={} dropped={}\n",
        m.t_s, m.blinks, m.chews, m.dropped
    )
}

fn record(a: RecordArgs, io: &mut Io) -> Result<(), CliError> {
    check_block_len(a.backend.block_len)?;
    check_out_path(&a.out)?;
    if let Some(d) = a.duration {
        if !(d.is_finite() && d > 0.0) {
            return Err(CliError::Usage(format!("duration {d} must be positive")));
        }
    }
    install_interrupt();
    let spec = parse_backend(&a.backend.backend, a.backend.seed)?;
    let built = build(&spec, None, pipeline_config(a.backend.block_len, !a.fast))?;
    let header = session_header(&built);
    let label = built.labels[0].clone();
    let pipeline = &built.pipeline;
    let recorder = Recorder::start(pipeline, SessionWriter::create(&a.out, header)?)?;
    let overflow = if a.fast { Overflow::Block } else { Overflow::DropOldest };
    let sub = pipeline.subscribe_with(64, overflow)?;
    let fs = f64::from(pipeline.register_file().sample_rate());
    let limit = a.duration.map(|d| (d * fs).round() as u64);
    let mut engine = MetricsEngine::new(DetectorConfig::default());
    let mut seen = 0u64;
    pipeline.start()?;
    loop {
        if interrupted() {
            pipeline.stop();
        }
        match sub.recv_timeout(Duration::from_millis(100)) {
            Ok(block) => {
                seen += (block.len() as u64) + block.dropped_before;
                if let Some(m) = engine.push(&block) {
                    let line = MetricsLine { event: "metrics", metrics: &m };
                    io.emit(&line, || metrics_text(&m, &label))?;
                }
                if limit.is_some_and(|l| seen >= l) {
                    pipeline.stop();
                }
            }
            Err(RecvError::Timeout) => {}
            Err(RecvError::Ended) => break,
        }
    }
    let failure = pipeline.error();
    pipeline.close();
    recorder.finish()?.flush()?;
    if let Some(e) = failure {
        return Err(CliError::Io(format!("acquisition failed: {e}")));
    }
    let stats = pipeline.stats();
    let w = Written {
        path: &a.out,
        blocks: stats.produced_blocks,
        samples: stats.produced,
        duration_s: stats.produced as f64 / fs,
        fs: fs as u32,
        dropped: stats.dropped,
    };
    io.emit(&w, || written_text(&w))
}

fn server_config(l: &Listen) -> Result<ServerConfig, CliError> {
    if l.no_tcp && l.no_ws {
        return Err(CliError::Usage("--no-tcp and --no-ws leave nothing to serve".into()));
    }
    Ok(ServerConfig {
        tcp: (!l.no_tcp).then_some(l.tcp),
        ws: (!l.no_ws).then_some(l.ws),
    })
}

fn station_options(l: &Listen) -> StationOptions {
    StationOptions {
        token: l.token.clone().filter(|t| !t.is_empty()),
        ..StationOptions::default()
    }
}

/// Serves until interrupted, the wall-clock limit passes, or (with
/// `exit_on_end`) the stream finishes.
fn run_station(station: Arc<Station>, l: &Listen, io: &mut Io) -> Result<(), CliError> {
    install_interrupt();
    if let Some(d) = l.duration {
        if !(d.is_finite() && d >= 0.0) {
            return Err(CliError::Usage(format!("duration {d} must be non-negative")));
        }
    }
    let server = serve(Arc::clone(&station), &server_config(l)?)?;
    let tcp = server.tcp_addr().map(|a| a.to_string());
    let ws = server.ws_addr().map(|a| format!("ws://{a}{}", peeg_stream::WS_PATH));
    let line = json!({"event": "listening", "tcp": tcp, "ws": ws});
    io.emit(&line, || {
        format!(
            "listening tcp={} ws={}\n",
            tcp.as_deref().unwrap_or("-"),
            ws.as_deref().unwrap_or("-")
        )
    })?;
    if !l.idle {
        station.pipeline().start()?;
    }
    let deadline = l.duration.map(|d| Instant::now() + Duration::from_secs_f64(d));
    while !interrupted()
        && !deadline.is_some_and(|d| Instant::now() >= d)
        && !(l.exit_on_end && station.pipeline().state() == PipelineState::Finished)
    {
        std::thread::sleep(Duration::from_millis(20));
    }
    server.shutdown();
    let p = station.pipeline();
    p.close();
    if let Some(e) = p.error() {
        return Err(CliError::Io(format!("acquisition failed: {e}")));
    }
    Ok(())
}

/// Matches the register rate to a scenario so a rebuilt simulator can run.
fn rate_for(rf: RegisterFile, fs: u32) -> Result<RegisterFile, String> {
    if rf.sample_rate() == fs {
        return Ok(rf);
    }
    let rate = peeg_ads1299::DataRate::from_sps(fs).map_err(|e| e.to_string())?;
    let config1 = rf.config1_with_rate(rate);
    rf.write_register(peeg_ads1299::addr::CONFIG1, config1).map_err(|e| e.to_string())
}

fn serve_cmd(a: ServeArgs, io: &mut Io) -> Result<(), CliError> {
    check_block_len(a.backend.block_len)?;
    let spec = parse_backend(&a.backend.backend, a.backend.seed)?;
    let block_len = a.backend.block_len;
    let built = build(&spec, None, pipeline_config(block_len, true))?;
    let header = session_header(&built);
    let recorder = match &a.record {
        Some(path) => {
            check_out_path(path)?;
            Some(Recorder::start(&built.pipeline, SessionWriter::create(path, header)?)?)
        }
        None => None,
    };
    let mut station = Station::new(built.pipeline, built.labels, station_options(&a.listen));
    // A recording covers exactly one pipeline, so recording disables rebuilds.
    if recorder.is_none() {
        station = station.with_rebuild(Box::new(move |r: RebuildRequest| {
            let cfg = PipelineConfig {
                block_len,
                pacing: Pacing::RealTime,
                first_seq: r.first_seq,
                t0_offset_ns: r.t0_offset_ns,
            };
            let next = match (&spec, r.scenario) {
                (BackendSpec::Sim(base), scenario) => {
                    let s = scenario.unwrap_or_else(|| base.clone());
                    let rf = rate_for(r.register_file, s.fs)?;
                    let labels = s.labels();
                    let backend = SimulatorBackend::new(s).map_err(|e| e.to_string())?;
                    (Pipeline::new(Box::new(backend), rf, cfg).map_err(|e| e.to_string())?, labels)
                }
                (BackendSpec::Hardware(_), Some(_)) => return Err("the hardware backend has no scenarios".into()),
                (BackendSpec::Hardware(_), None) => {
                    let b = build(&spec, Some(r.register_file), cfg).map_err(|e| e.to_string())?;
                    (b.pipeline, b.labels)
                }
            };
            Ok(next)
        }));
    }
    let station = Arc::new(station);
    if let Some(r) = &recorder {
        station.set_annotation_sink(Some(Arc::new(r.annotator())));
    }
    let result = run_station(Arc::clone(&station), &a.listen, io);
    if let Some(r) = recorder {
        station.set_annotation_sink(None);
        station.pipeline().close();
        r.finish()?.flush()?;
    }
    result
}

fn replay_pipeline(
    session: &peeg_session::Session,
    rf: RegisterFile,
    block_len: usize,
    pacing: Pacing,
    first_seq: u64,
    t0_offset_ns: u64,
) -> Result<Pipeline, CliError> {
    let backend = ReplayBackend::new(session.to_replay_source(), block_len)?;
    let cfg = PipelineConfig {
        block_len,
        pacing,
        first_seq,
        t0_offset_ns,
    };
    Ok(Pipeline::new(Box::new(backend), rf, cfg)?)
}

fn replay(a: ReplayArgs, io: &mut Io) -> Result<(), CliError> {
    if !a.session.is_file() {
        return Err(CliError::Io(format!("{}: no such session file", a.session.display())));
    }
    let session = recover_session(&a.session)?;
    if session.footer.is_none() {
        io.note("note: session has no footer; replaying the complete blocks only");
    }
    let block_len = a.block_len.unwrap_or(session.header.block_len);
    check_block_len(block_len)?;
    let mut rf = register_file_for(session.header.fs)?;
    for (c, &g) in session.header.gains.iter().enumerate() {
        let gain = Gain::from_value(g).map_err(|e| CliError::Usage(e.to_string()))?;
        rf = rf.with_gain(c, gain).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let pacing = if a.fast { Pacing::Unpaced } else { Pacing::RealTime };
    let pipeline = replay_pipeline(&session, rf, block_len, pacing, 0, 0)?;
    let labels = session.header.channel_labels.clone();
    let rebuild_labels = labels.clone();
    let station = Station::new(pipeline, labels, station_options(&a.listen)).with_rebuild(Box::new(
        move |r: RebuildRequest| {
            if r.scenario.is_some() {
                return Err("a replay has no scenarios".into());
            }
            let p = replay_pipeline(&session, r.register_file, block_len, pacing, r.first_seq, r.t0_offset_ns)
                .map_err(|e| e.to_string())?;
            Ok((p, rebuild_labels.clone()))
        },
    ));
    run_station(Arc::new(station), &a.listen, io)
}

fn analyze_cmd(kind: AnalyzeKind, io: &mut Io) -> Result<(), CliError> {
    let load = |c: &AnalyzeCommon| analyze::load(&c.session, c.channel.as_deref(), c.config.as_deref());
    match kind {
        AnalyzeKind::Alpha { common, segment, first } => {
            let first = match first {
                Eyes::Closed => EyeState::Closed,
                Eyes::Open => EyeState::Open,
            };
            let o = analyze::alpha(&load(&common)?, segment, first)?;
            io.emit(&o, || analyze::alpha_text(&o))
        }
        AnalyzeKind::Artifacts { common } => {
            let o = analyze::artifacts(&load(&common)?)?;
            io.emit(&o, || analyze::artifacts_text(&o))
        }
        AnalyzeKind::Emg { common } => {
            let o = analyze::emg(&load(&common)?)?;
            io.emit(&o, || analyze::emg_text(&o))
        }
        AnalyzeKind::Ecg { common } => {
            let o = analyze::ecg(&load(&common)?)?;
            io.emit(&o, || analyze::ecg_text(&o))
        }
    }
}

fn parse_int(s: &str) -> Option<u64> {
    let t = s.trim();
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(h, 16).ok()
    } else if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        u64::from_str_radix(b, 2).ok()
    } else {
        t.parse().ok()
    }
}

/// An address (`5`, `0x05`) or a register name (`CH1SET`).
pub fn parse_register(s: &str) -> Result<u8, CliError> {
    if let Some(v) = parse_int(s) {
        return u8::try_from(v).map_err(|_| CliError::Usage(format!("register address {s} is out of range")));
    }
    (0..REGISTER_COUNT as u8)
        .find(|&a| RegisterFile::register_name(a).is_some_and(|n| n.eq_ignore_ascii_case(s)))
        .ok_or_else(|| CliError::Usage(format!("unknown register {s:?}")))
}

pub fn parse_byte(s: &str) -> Result<u8, CliError> {
    parse_int(s)
        .and_then(|v| u8::try_from(v).ok())
        .ok_or_else(|| CliError::Usage(format!("register value {s:?} is not a byte")))
}

#[derive(Serialize)]
struct RegValue {
    addr: u8,
    name: &'static str,
    value: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    epoch: Option<u32>,
}

fn reg_text(r: &RegValue) -> String {
    match r.epoch {
        Some(e) => format!("0x{:02X} {:<10} 0x{:02X} epoch {e}\n", r.addr, r.name, r.value),
        None => format!("0x{:02X} {:<10} 0x{:02X}\n", r.addr, r.name, r.value),
    }
}

fn connect(r: &Remote) -> Result<(Client, Duration), CliError> {
    let timeout = Duration::from_millis(r.timeout_ms.max(1));
    let token = r.token.as_deref().filter(|t| !t.is_empty());
    Ok((Client::connect(&r.endpoint, token, timeout)?, timeout))
}

fn regs(op: RegsOp, io: &mut Io) -> Result<(), CliError> {
    match op {
        RegsOp::Get { register, remote } => {
            let addrs: Vec<u8> = match register {
                Some(r) => vec![parse_register(&r)?],
                None => (0..REGISTER_COUNT as u8).collect(),
            };
            let (mut client, timeout) = connect(&remote)?;
            let mut values = Vec::new();
            for addr in addrs {
                let ack = client.command(CmdOp::Rreg { addr }, timeout)?;
                let value = ack
                    .value
                    .ok_or_else(|| CliError::Protocol(format!("ACK for register 0x{addr:02X} carries no value")))?;
                values.push(RegValue {
                    addr,
                    name: RegisterFile::register_name(addr).unwrap_or("?"),
                    value,
                    epoch: None,
                });
            }
            if values.len() == 1 {
                io.emit(&values[0], || reg_text(&values[0]))
            } else {
                io.emit(&values, || values.iter().map(reg_text).collect())
            }
        }
        RegsOp::Set { register, value, remote } => {
            let addr = parse_register(&register)?;
            let value = parse_byte(&value)?;
            let (mut client, timeout) = connect(&remote)?;
            let ack = client.command(CmdOp::Wreg { addr, value }, timeout)?;
            let r = RegValue {
                addr,
                name: RegisterFile::register_name(addr).unwrap_or("?"),
                value: ack.value.unwrap_or(value),
                epoch: ack.epoch,
            };
            io.emit(&r, || reg_text(&r))
        }
    }
}

fn export(kind: ExportKind, io: &mut Io) -> Result<(), CliError> {
    match kind {
        ExportKind::Csv { session, out } => {
            if !session.is_file() {
                return Err(CliError::Io(format!("{}: no such session file", session.display())));
            }
            let s = recover_session(&session)?;
            if s.footer.is_none() {
                io.note("note: session has no footer; exporting the complete blocks only");
            }
            match out {
                Some(path) => {
                    check_out_path(&path)?;
                    let mut w = BufWriter::new(File::create(&path)?);
                    export_csv(&s, &mut w)?;
                    w.flush()?;
                }
                None => {
                    export_csv(&s, &mut *io.out)?;
                    io.out.flush()?;
                }
            }
            Ok(())
        }
    }
}
