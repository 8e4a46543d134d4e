use crate::error::Ads1299Error;
use crate::registers::REGISTER_COUNT;

/// SPI command set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Wakeup,
    Standby,
    Reset,
    Start,
    Stop,
    /// Enable read-data-continuous mode.
    Rdatac,
    /// Stop read-data-continuous mode.
    Sdatac,
    /// Read a single frame on demand.
    Rdata,
    /// Read `count` registers starting at `addr`.
    Rreg { addr: u8, count: u8 },
    /// Write `count` registers starting at `addr`; the payload bytes follow the opcode.
    Wreg { addr: u8, count: u8 },
}

const RREG_BASE: u8 = 0x20;
const WREG_BASE: u8 = 0x40;

impl Command {
    /// Opcode bytes as clocked out on MOSI.
    ///
    /// Register commands take two bytes: `base | addr` followed by `count - 1`.
    pub fn opcode(self) -> Result<Vec<u8>, Ads1299Error> {
        let single = |b: u8| Ok(vec![b]);
        match self {
            Command::Wakeup => single(0x02),
            Command::Standby => single(0x04),
            Command::Reset => single(0x06),
            Command::Start => single(0x08),
            Command::Stop => single(0x0A),
            Command::Rdatac => single(0x10),
            Command::Sdatac => single(0x11),
            Command::Rdata => single(0x12),
            Command::Rreg { addr, count } => {
                check_range(addr, count)?;
                Ok(vec![RREG_BASE | addr, count - 1])
            }
            Command::Wreg { addr, count } => {
                check_range(addr, count)?;
                Ok(vec![WREG_BASE | addr, count - 1])
            }
        }
    }
}

fn check_range(addr: u8, count: u8) -> Result<(), Ads1299Error> {
    if count == 0 || addr as usize + count as usize > REGISTER_COUNT {
        return Err(Ads1299Error::InvalidAddressRange { addr, count });
    }
    Ok(())
}
