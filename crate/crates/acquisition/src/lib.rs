//! The live sampling loop: device backends, register-aware code conversion,
//! and fan-out of sequence-numbered sample blocks to bounded subscribers.

mod backend;
mod block;
pub mod hardware;
mod pipeline;
mod replay;
mod simulator;

pub use backend::{BackendKind, Capabilities, DeviceBackend, Poll};
pub use block::SampleBlock;
pub use hardware::HardwareConfig;
#[cfg(all(feature = "hardware", target_os = "linux"))]
pub use hardware::HardwareBackend;
pub use pipeline::{
    Ack, Overflow, Pacing, Pipeline, PipelineConfig, PipelineState, PipelineStats, RecvError,
    SubscriberStats, Subscription,
};
pub use replay::{ReplayBackend, ReplayChunk, ReplaySource};
pub use simulator::{CodeMode, SimulatorBackend};

use peeg_ads1299::Ads1299Error;

#[derive(Debug, thiserror::Error)]
pub enum AcquisitionError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("pipeline already started")]
    AlreadyRunning,
    #[error("pipeline is closed")]
    PipelineClosed,
    #[error("pipeline is not running")]
    NotRunning,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Register(#[from] Ads1299Error),
    #[error("register file selects {configured} SPS but the source runs at {source_rate} SPS")]
    RateMismatch { configured: u32, source_rate: u32 },
    #[error("block length {block_len}: {reason}")]
    InvalidBlockLen { block_len: usize, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
