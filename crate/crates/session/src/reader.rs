use std::path::Path;

use crc32fast::Hasher;
use peeg_acquisition::{ReplayChunk, ReplaySource, SampleBlock};

use crate::format::{
    decode_annotation, decode_block, Footer, FORMAT_VERSION, MAGIC, MAX_HEADER_LEN, MAX_RECORD_LEN,
    TAG_ANNOTATION, TAG_BLOCK, TAG_FOOTER,
};
use crate::{SessionError, SessionHeader};

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub time_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub header: SessionHeader,
    pub annotations: Vec<Annotation>,
    pub blocks: Vec<SampleBlock>,
    /// `None` when the file was cut short.
    pub footer: Option<Footer>,
}

impl Session {
    pub fn sample_count(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn duration_s(&self) -> f64 {
        self.sample_count() as f64 / f64::from(self.header.fs)
    }

    /// All microvolt samples of one channel, concatenated across blocks.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.channel(c).iter().copied()).collect()
    }

    /// Groups blocks into runs of identical gains for the replay backend.
    pub fn to_replay_source(&self) -> ReplaySource {
        let mut chunks: Vec<ReplayChunk> = Vec::new();
        for b in &self.blocks {
            let n = b.len();
            let frames = (0..n).map(|i| std::array::from_fn(|c| b.codes[c * n + i]));
            match chunks.last_mut() {
                Some(last) if last.gains == b.gains => last.frames.extend(frames),
                _ => chunks.push(ReplayChunk {
                    gains: b.gains,
                    frames: frames.collect(),
                }),
            }
        }
        ReplaySource {
            fs: self.header.fs,
            vref: self.header.vref,
            chunks,
        }
    }
}

/// Reads and fully validates a finished session.
pub fn read_session(path: &Path) -> Result<Session, SessionError> {
    let bytes = std::fs::read(path)?;
    read_session_bytes(&bytes)
}

/// Reads a possibly unfinished session, keeping every complete record.
/// Corruption is still an error.
pub fn recover_session(path: &Path) -> Result<Session, SessionError> {
    match read_session(path) {
        Err(SessionError::Truncated { recovered }) => Ok(*recovered),
        other => other,
    }
}

pub fn read_session_bytes(bytes: &[u8]) -> Result<Session, SessionError> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        file_crc: Hasher::new(),
    };
    let header = match r.preamble()? {
        Some(h) => h,
        None => return Err(SessionError::Malformed("file ends inside the header".into())),
    };
    let mut session = Session {
        header,
        annotations: Vec::new(),
        blocks: Vec::new(),
        footer: None,
    };
    loop {
        let crc_before = r.file_crc.clone().finalize();
        let Some((tag, payload)) = r.record()? else {
            return Err(SessionError::Truncated {
                recovered: Box::new(session),
            });
        };
        match tag {
            TAG_BLOCK => {
                let block = decode_block(payload, session.header.vref)?;
                if block.fs != session.header.fs {
                    return Err(SessionError::InconsistentRate {
                        expected: session.header.fs,
                        found: block.fs,
                    });
                }
                if session.blocks.last().is_some_and(|p| block.seq <= p.seq || block.t0_ns < p.t0_ns) {
                    return Err(SessionError::Malformed(format!("block {} out of order", block.seq)));
                }
                session.blocks.push(block);
            }
            TAG_ANNOTATION => {
                let (time_s, text) = decode_annotation(payload)?;
                session.annotations.push(Annotation { time_s, text });
            }
            TAG_FOOTER => {
                let footer = Footer::decode(payload)?;
                if footer.file_crc != crc_before {
                    return Err(SessionError::ChecksumMismatch("file"));
                }
                let counts = (
                    session.blocks.len() as u64,
                    session.sample_count() as u64,
                    session.annotations.len() as u64,
                );
                if counts != (footer.blocks, footer.samples, footer.annotations) {
                    return Err(SessionError::Malformed("footer counts disagree with records".into()));
                }
                if r.pos != bytes.len() {
                    return Err(SessionError::Malformed("data after footer".into()));
                }
                session.footer = Some(footer);
                return Ok(session);
            }
            other => return Err(SessionError::Malformed(format!("unknown record tag {other:#04x}"))),
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    file_crc: Hasher,
}

impl<'a> Reader<'a> {
    /// `None` at a clean or mid-item end of input.
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.buf.get(self.pos..end)?;
        self.pos = end;
        self.file_crc.update(out);
        Some(out)
    }

    fn preamble(&mut self) -> Result<Option<SessionHeader>, SessionError> {
        let Some(magic) = self.take(MAGIC.len()) else {
            return if MAGIC.starts_with(self.buf) {
                Ok(None)
            } else {
                Err(SessionError::BadMagic)
            };
        };
        if magic != MAGIC {
            return Err(SessionError::BadMagic);
        }
        let Some(v) = self.take(2) else { return Ok(None) };
        let version = u16::from_le_bytes([v[0], v[1]]);
        if version != FORMAT_VERSION {
            return Err(SessionError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let Some(l) = self.take(4) else { return Ok(None) };
        let len = u32::from_le_bytes(l.try_into().expect("4 bytes"));
        if len > MAX_HEADER_LEN {
            return Err(SessionError::Malformed(format!("header of {len} bytes")));
        }
        let Some(json) = self.take(len as usize) else { return Ok(None) };
        let Some(crc) = self.take(4) else { return Ok(None) };
        if u32::from_le_bytes(crc.try_into().expect("4 bytes")) != crc32fast::hash(json) {
            return Err(SessionError::ChecksumMismatch("header"));
        }
        let header: SessionHeader =
            serde_json::from_slice(json).map_err(|e| SessionError::Malformed(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(SessionError::UnsupportedVersion {
                found: header.format_version,
                supported: FORMAT_VERSION,
            });
        }
        header.validate()?;
        Ok(Some(header))
    }

    fn record(&mut self) -> Result<Option<(u8, &'a [u8])>, SessionError> {
        let Some(head) = self.take(5) else { return Ok(None) };
        let tag = head[0];
        let len = u32::from_le_bytes(head[1..5].try_into().expect("4 bytes"));
        if len > MAX_RECORD_LEN {
            return Err(SessionError::Malformed(format!("record of {len} bytes")));
        }
        let Some(payload) = self.take(len as usize) else { return Ok(None) };
        let Some(crc) = self.take(4) else { return Ok(None) };
        let mut h = Hasher::new();
        h.update(head);
        h.update(payload);
        if u32::from_le_bytes(crc.try_into().expect("4 bytes")) != h.finalize() {
            return Err(SessionError::ChecksumMismatch(match tag {
                TAG_BLOCK => "block record",
                TAG_ANNOTATION => "annotation record",
                TAG_FOOTER => "footer record",
                _ => "record",
            }));
        }
        Ok(Some((tag, payload)))
    }
}
