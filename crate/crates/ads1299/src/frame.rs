//! Continuous-read data frame: 24-bit status word followed by eight 24-bit
//! two's-complement channel codes, all big-endian, 27 bytes total.

use crate::error::Ads1299Error;
use crate::CHANNELS;

pub const FRAME_LEN: usize = 3 + 3 * CHANNELS;
pub const CODE_MAX: i32 = (1 << 23) - 1;
pub const CODE_MIN: i32 = -(1 << 23);
/// Fixed lead nibble of every status word (`1100`).
pub const STATUS_SYNC_NIBBLE: u8 = 0xC;

/// 24-bit status word: sync nibble, LOFF_STATP, LOFF_STATN, GPIO[7:4].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StatusWord(pub u32);

impl StatusWord {
    pub fn new(loff_statp: u8, loff_statn: u8, gpio: u8) -> Self {
        StatusWord(
            (u32::from(STATUS_SYNC_NIBBLE) << 20)
                | (u32::from(loff_statp) << 12)
                | (u32::from(loff_statn) << 4)
                | u32::from(gpio & 0x0F),
        )
    }

    pub fn sync_nibble(self) -> u8 {
        ((self.0 >> 20) & 0x0F) as u8
    }

    pub fn loff_statp(self) -> u8 {
        (self.0 >> 12) as u8
    }

    pub fn loff_statn(self) -> u8 {
        (self.0 >> 4) as u8
    }

    pub fn gpio(self) -> u8 {
        (self.0 & 0x0F) as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DataFrame {
    pub status: StatusWord,
    pub codes: [i32; CHANNELS],
}

impl DataFrame {
    pub fn new(codes: [i32; CHANNELS]) -> Self {
        Self {
            status: StatusWord::new(0, 0, 0),
            codes,
        }
    }
}

/// Whether the decoder insists on the status sync nibble.
///
/// Disable it only for replaying captures from tools that zero the status word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyncCheck {
    #[default]
    Enabled,
    Disabled,
}

pub fn decode_frame(raw: &[u8]) -> Result<DataFrame, Ads1299Error> {
    decode_frame_with(raw, SyncCheck::Enabled)
}

pub fn decode_frame_with(raw: &[u8], sync: SyncCheck) -> Result<DataFrame, Ads1299Error> {
    if raw.len() != FRAME_LEN {
        return Err(Ads1299Error::WrongLength(raw.len()));
    }
    let status = StatusWord(u32::from_be_bytes([0, raw[0], raw[1], raw[2]]));
    if sync == SyncCheck::Enabled && status.sync_nibble() != STATUS_SYNC_NIBBLE {
        return Err(Ads1299Error::BadSyncNibble {
            found: status.sync_nibble(),
            expected: STATUS_SYNC_NIBBLE,
        });
    }
    let mut codes = [0i32; CHANNELS];
    for (code, triple) in codes.iter_mut().zip(raw[3..].chunks_exact(3)) {
        // place the 24-bit value in the top of an i32, then arithmetic-shift back down
        *code = i32::from_be_bytes([triple[0], triple[1], triple[2], 0]) >> 8;
    }
    Ok(DataFrame { status, codes })
}

pub fn encode_frame(frame: &DataFrame) -> Result<[u8; FRAME_LEN], Ads1299Error> {
    if frame.status.0 > 0x00FF_FFFF {
        return Err(Ads1299Error::StatusOutOfRange(frame.status.0));
    }
    let mut out = [0u8; FRAME_LEN];
    out[..3].copy_from_slice(&frame.status.0.to_be_bytes()[1..]);
    for (channel, (&code, slot)) in frame
        .codes
        .iter()
        .zip(out[3..].chunks_exact_mut(3))
        .enumerate()
    {
        if !(CODE_MIN..=CODE_MAX).contains(&code) {
            return Err(Ads1299Error::CodeOutOfRange { channel, code });
        }
        slot.copy_from_slice(&code.to_be_bytes()[1..]);
    }
    Ok(out)
}
