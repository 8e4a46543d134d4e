//! Deterministic synthetic biosignals.
//!
//! A [`Scenario`] describes eight channels (electrode label, background
//! noise, mains pickup, per-event coupling) and a timeline of events. The
//! renderer turns it into µV samples and reports the exact event markers it
//! used, which the analysis tests treat as ground truth.

mod noise;
mod presets;
mod render;
mod scenario;

use thiserror::Error;

pub use noise::{band_noise, mix64, PinkNoise, WhiteNoise};
pub use presets::*;
pub use render::{render, GroundTruth, RenderStream, Rendering, TruthEvent};
pub use scenario::{
    is_valid_label, ChannelPlan, Event, EventClass, EventGains, EventKind, Scenario,
    DEFAULT_LABELS, SCENARIO_VERSION, TEN_TWENTY_LABELS,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unsupported sample rate {0} SPS")]
    UnsupportedRate(u32),
    #[error("unsupported scenario_version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
