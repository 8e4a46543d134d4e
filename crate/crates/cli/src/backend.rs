//! Turning `--backend` and `--scenario` strings into pipelines.

use std::path::{Path, PathBuf};

use peeg_acquisition::{DeviceBackend, Pacing, Pipeline, PipelineConfig, SimulatorBackend};
use peeg_ads1299::{addr, DataRate, RegisterFile, DEFAULT_VREF};
use peeg_session::SessionHeader;
use peeg_synth::{named_scenario, Scenario, DEFAULT_LABELS};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub enum BackendSpec {
    Sim(Scenario),
    Hardware(PathBuf),
}

/// A shortcut name, or a path to scenario JSON when no shortcut matches.
pub fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    if let Some(s) = named_scenario(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "unknown scenario {spec:?}: not a shortcut (fig6, fig7, fig8, fig9, ecg:<bpm>) nor an existing file"
        )));
    }
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_backend(spec: &str, seed: Option<u64>) -> Result<BackendSpec, CliError> {
    match spec.split_once(':') {
        Some(("sim", rest)) => {
            let mut s = load_scenario(rest)?;
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            Ok(BackendSpec::Sim(s))
        }
        Some(("hw", path)) if !path.is_empty() => Ok(BackendSpec::Hardware(PathBuf::from(path))),
        _ => Err(CliError::Usage(format!(
            "backend {spec:?} must be sim:<scenario> or hw:<config.toml>"
        ))),
    }
}

/// Power-on registers with the data rate set to `fs`.
pub fn register_file_for(fs: u32) -> Result<RegisterFile, CliError> {
    let rate = DataRate::from_sps(fs).map_err(|e| CliError::Usage(e.to_string()))?;
    let rf = RegisterFile::default();
    let config1 = rf.config1_with_rate(rate);
    rf.write_register(addr::CONFIG1, config1)
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub struct Built {
    pub pipeline: Pipeline,
    pub labels: Vec<String>,
    pub kind: &'static str,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
}

pub fn build(
    spec: &BackendSpec,
    rf: Option<RegisterFile>,
    cfg: PipelineConfig,
) -> Result<Built, CliError> {
    match spec {
        BackendSpec::Sim(s) => {
            let rf = match rf {
                Some(rf) => rf,
                None => register_file_for(s.fs)?,
            };
            let backend = SimulatorBackend::new(s.clone())?;
            Ok(Built {
                pipeline: Pipeline::new(Box::new(backend), rf, cfg)?,
                labels: s.labels(),
                kind: "simulator",
                scenario: Some(s.name.clone()),
                seed: Some(s.seed),
            })
        }
        BackendSpec::Hardware(path) => {
            let backend = hardware(path)?;
            Ok(Built {
                pipeline: Pipeline::new(backend, rf.unwrap_or_default(), cfg)?,
                labels: DEFAULT_LABELS.iter().map(|l| l.to_string()).collect(),
                kind: "hardware",
                scenario: None,
                seed: None,
            })
        }
    }
}

#[cfg(all(feature = "hardware", target_os = "linux"))]
fn hardware(path: &Path) -> Result<Box<dyn DeviceBackend>, CliError> {
    let cfg = peeg_acquisition::HardwareConfig::load(path)?;
    Ok(Box::new(peeg_acquisition::HardwareBackend::new(cfg)))
}

#[cfg(not(all(feature = "hardware", target_os = "linux")))]
fn hardware(path: &Path) -> Result<Box<dyn DeviceBackend>, CliError> {
    // Still validate the file so configuration mistakes surface on any machine.
    peeg_acquisition::HardwareConfig::load(path)?;
    Err(CliError::Io(
        "this build has no SPI support; rebuild with --features hardware on Linux".into(),
    ))
}

pub fn pipeline_config(block_len: usize, realtime: bool) -> PipelineConfig {
    PipelineConfig {
        block_len,
        pacing: if realtime { Pacing::RealTime } else { Pacing::Unpaced },
        ..PipelineConfig::default()
    }
}

pub fn session_header(built: &Built) -> SessionHeader {
    let p = &built.pipeline;
    let rf = p.register_file();
    let gains = rf.gains().iter().map(|g| g.value()).collect();
    let mut h = SessionHeader::new(rf.sample_rate(), built.labels.clone(), gains, built.kind, p.config().block_len);
    h.vref = DEFAULT_VREF;
    h.scenario = built.scenario.clone();
    if let Some(seed) = built.seed {
        h.extra.insert("seed".into(), seed.into());
    }
    h
}
