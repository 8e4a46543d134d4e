use peeg_ads1299::{DataFrame, RegisterFile};

use crate::AcquisitionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Simulator,
    Replay,
    Hardware,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Simulator => "simulator",
            BackendKind::Replay => "replay",
            BackendKind::Hardware => "hardware",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub register_writes: bool,
    pub mid_stream_rate_change: bool,
    /// The device itself paces frames (data-ready line); no software sleeper needed.
    pub self_paced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Poll {
    Frame(DataFrame),
    /// The source switched configuration; the following frames use it.
    Config(RegisterFile),
    End,
}

/// A source of converter frames.
///
/// The pipeline calls `open` once, then `poll` repeatedly from its producer
/// thread; `write_register` is only ever called between frames.
pub trait DeviceBackend: Send {
    fn kind(&self) -> BackendKind;

    fn capabilities(&self) -> Capabilities;

    /// Applies the initial configuration and returns the one actually in effect.
    fn open(&mut self, rf: &RegisterFile) -> Result<RegisterFile, AcquisitionError>;

    fn poll(&mut self) -> Result<Poll, AcquisitionError>;

    /// Pushes one accepted register write to the device. `rf` already contains it.
    fn write_register(&mut self, addr: u8, value: u8, rf: &RegisterFile) -> Result<(), AcquisitionError>;
}
