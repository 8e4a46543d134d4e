use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Ads1299Error {
    #[error("frame must be 27 bytes, got {0}")]
    WrongLength(usize),
    #[error("status word lead nibble {found:#x} does not match sync pattern {expected:#x}")]
    BadSyncNibble { found: u8, expected: u8 },
    #[error("channel {channel} code {code} outside signed 24-bit range")]
    CodeOutOfRange { channel: usize, code: i32 },
    #[error("status word {0:#x} does not fit in 24 bits")]
    StatusOutOfRange(u32),
    #[error("no register at address {0:#04x}")]
    UnknownRegister(u8),
    #[error("register {0:#04x} is read-only")]
    ReadOnlyRegister(u8),
    #[error("invalid value {value:#04x} for register {addr:#04x}: {reason}")]
    InvalidFieldEncoding {
        addr: u8,
        value: u8,
        reason: &'static str,
    },
    #[error("register range starting at {addr:#04x} with count {count} is invalid")]
    InvalidAddressRange { addr: u8, count: u8 },
    #[error("unsupported gain {0}")]
    UnsupportedGain(u32),
    #[error("unsupported data rate {0} SPS")]
    UnsupportedDataRate(u32),
}
