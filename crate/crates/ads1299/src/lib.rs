//! Software model of an ADS1299-style 8-channel, 24-bit delta-sigma converter.
//!
//! Everything here is pure and deterministic: the register bank is a value
//! type, the SPI command set maps to fixed opcode bytes, and the 27-byte
//! continuous-read frame is decoded and encoded without any I/O.

mod command;
mod convert;
mod error;
mod frame;
mod registers;

pub use command::Command;
pub use convert::{code_to_microvolts, microvolts_to_code, ConversionParams, DEFAULT_VREF};
pub use error::Ads1299Error;
pub use frame::{
    decode_frame, decode_frame_with, encode_frame, DataFrame, StatusWord, SyncCheck, CODE_MAX,
    CODE_MIN, FRAME_LEN, STATUS_SYNC_NIBBLE,
};
pub use registers::{
    addr, DataRate, Gain, InputMux, RegisterFile, DEVICE_ID, REGISTER_COUNT,
};

/// Number of analog input channels on the device.
pub const CHANNELS: usize = 8;
