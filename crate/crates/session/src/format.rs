use peeg_acquisition::SampleBlock;
use peeg_ads1299::{code_to_microvolts, ConversionParams, Gain, CHANNELS};

use crate::SessionError;

pub const MAGIC: &[u8; 8] = b"PEEGSESS";
pub const FORMAT_VERSION: u16 = 1;
pub const MAX_HEADER_LEN: u32 = 1 << 20;
pub const MAX_RECORD_LEN: u32 = 64 << 20;

pub const TAG_BLOCK: u8 = 0x01;
pub const TAG_ANNOTATION: u8 = 0x02;
pub const TAG_FOOTER: u8 = 0xFF;

/// seq, t0, host time, dropped_before (u64 each), epoch, fs, gains[8], n.
const BLOCK_FIXED: usize = 8 * 4 + 4 + 4 + CHANNELS + 4;
const FOOTER_LEN: usize = 8 * 3 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footer {
    pub blocks: u64,
    pub samples: u64,
    pub annotations: u64,
    /// CRC-32 of every byte before the footer record.
    pub file_crc: u32,
}

impl Footer {
    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FOOTER_LEN);
        out.extend_from_slice(&self.blocks.to_le_bytes());
        out.extend_from_slice(&self.samples.to_le_bytes());
        out.extend_from_slice(&self.annotations.to_le_bytes());
        out.extend_from_slice(&self.file_crc.to_le_bytes());
        out
    }

    pub(crate) fn decode(p: &[u8]) -> Result<Self, SessionError> {
        if p.len() != FOOTER_LEN {
            return Err(SessionError::Malformed(format!("footer of {} bytes", p.len())));
        }
        let mut c = Cursor::new(p);
        Ok(Self {
            blocks: c.u64()?,
            samples: c.u64()?,
            annotations: c.u64()?,
            file_crc: c.u32()?,
        })
    }
}

pub(crate) fn encode_block(b: &SampleBlock) -> Vec<u8> {
    let n = b.len();
    let mut out = Vec::with_capacity(BLOCK_FIXED + 4 * n * CHANNELS);
    out.extend_from_slice(&b.seq.to_le_bytes());
    out.extend_from_slice(&b.t0_ns.to_le_bytes());
    out.extend_from_slice(&b.host_time_ns.to_le_bytes());
    out.extend_from_slice(&b.dropped_before.to_le_bytes());
    out.extend_from_slice(&b.epoch.to_le_bytes());
    out.extend_from_slice(&b.fs.to_le_bytes());
    out.extend_from_slice(&b.gain_values());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for code in &b.codes {
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

pub(crate) fn decode_block(p: &[u8], vref: f64) -> Result<SampleBlock, SessionError> {
    let mut c = Cursor::new(p);
    let seq = c.u64()?;
    let t0_ns = c.u64()?;
    let host_time_ns = c.u64()?;
    let dropped_before = c.u64()?;
    let epoch = c.u32()?;
    let fs = c.u32()?;
    let mut gains = [Gain::X1; CHANNELS];
    for g in gains.iter_mut() {
        let v = c.u8()?;
        *g = Gain::from_value(u32::from(v))
            .map_err(|_| SessionError::Malformed(format!("gain {v} in block {seq}")))?;
    }
    let n = c.u32()? as usize;
    if p.len() != BLOCK_FIXED + 4 * n * CHANNELS {
        return Err(SessionError::Malformed(format!(
            "block {seq} declares {n} samples in {} bytes",
            p.len()
        )));
    }
    let mut codes = Vec::with_capacity(n * CHANNELS);
    for _ in 0..n * CHANNELS {
        codes.push(c.i32()?);
    }
    let mut data = Vec::with_capacity(codes.len());
    for (ch, chunk) in codes.chunks(n.max(1)).enumerate().take(CHANNELS) {
        let params = ConversionParams::new(vref, gains[ch])
            .ok_or_else(|| SessionError::Malformed(format!("vref {vref}")))?;
        data.extend(chunk.iter().map(|&code| code_to_microvolts(code, &params)));
    }
    Ok(SampleBlock {
        seq,
        t0_ns,
        host_time_ns,
        fs,
        epoch,
        gains,
        vref,
        dropped_before,
        data,
        codes,
    })
}

pub(crate) fn encode_annotation(time_s: f64, text: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + text.len());
    out.extend_from_slice(&time_s.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out
}

pub(crate) fn decode_annotation(p: &[u8]) -> Result<(f64, String), SessionError> {
    let mut c = Cursor::new(p);
    let time = c.f64()?;
    let len = c.u32()? as usize;
    let bytes = c.take(len)?;
    if !c.is_empty() {
        return Err(SessionError::Malformed("trailing bytes in annotation".into()));
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| SessionError::Malformed("annotation is not UTF-8".into()))?;
    Ok((time, text.to_string()))
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], SessionError> {
        if self.buf.len() < n {
            return Err(SessionError::Malformed("record payload too short".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], SessionError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8, SessionError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, SessionError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn i32(&mut self) -> Result<i32, SessionError> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, SessionError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, SessionError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}
