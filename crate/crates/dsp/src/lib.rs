//! Signal processing for the PiEEG station: Butterworth filtering, Welch
//! spectra, alpha scoring and the blink, chew, EMG and R-peak detectors.
//!
//! Every routine is deterministic for a given input and configuration.

pub mod alpha;
pub mod artifacts;
pub mod config;
pub mod ecg;
pub mod emg;
pub mod filter;
pub mod spectrum;
pub mod stats;

pub use alpha::{score_alpha, AlphaReport, EyeState, ProtocolSegment, SegmentScore};
pub use artifacts::{detect_blinks, detect_chews, EventKind, EventList};
pub use config::{AlphaConfig, BlinkConfig, ChewConfig, DetectorConfig, EcgConfig, EmgConfig};
pub use ecg::{detect_r_peaks, EcgReport};
pub use emg::{emg_onsets, EmgReport};
pub use filter::{clamp_band, design_filter, Biquad, FilterCoefficients, FilterKind, FilterSpec, FilterState};
pub use spectrum::{bandpower, hann, welch_psd, Spectrum};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DspError {
    #[error("invalid filter or estimator parameters: {0}")]
    InvalidSpec(String),
    #[error("edge {edge_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    NyquistViolation { edge_hz: f64, nyquist_hz: f64 },
    #[error("design is unstable or too close to the unit circle (max pole radius {max_pole_radius})")]
    UnstableDesign { max_pole_radius: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("band [{low_hz}, {high_hz}] Hz is empty or outside [0, fs/2]")]
    BadBand { low_hz: f64, high_hz: f64 },
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
}
