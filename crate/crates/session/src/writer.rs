use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crc32fast::Hasher;
use peeg_acquisition::SampleBlock;

use crate::format::{encode_annotation, encode_block, Footer, FORMAT_VERSION, MAGIC, TAG_ANNOTATION, TAG_BLOCK, TAG_FOOTER};
use crate::{SessionError, SessionHeader};

/// Streaming session writer. Every record is complete on its own, so a
/// writer that dies leaves a recoverable prefix.
pub struct SessionWriter<W: Write> {
    out: W,
    file_crc: Hasher,
    header: SessionHeader,
    blocks: u64,
    samples: u64,
    annotations: u64,
    last_seq: Option<u64>,
}

impl SessionWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: SessionHeader) -> Result<Self, SessionError> {
        let file = File::create(path)?;
        Self::new(BufWriter::new(file), header)
    }
}

impl<W: Write> SessionWriter<W> {
    pub fn new(out: W, header: SessionHeader) -> Result<Self, SessionError> {
        header.validate()?;
        let json = serde_json::to_vec(&header).map_err(|e| SessionError::Malformed(e.to_string()))?;
        let mut w = Self {
            out,
            file_crc: Hasher::new(),
            header,
            blocks: 0,
            samples: 0,
            annotations: 0,
            last_seq: None,
        };
        w.put(MAGIC)?;
        w.put(&FORMAT_VERSION.to_le_bytes())?;
        w.put(&(json.len() as u32).to_le_bytes())?;
        w.put(&json)?;
        w.put(&crc32fast::hash(&json).to_le_bytes())?;
        Ok(w)
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    fn put(&mut self, bytes: &[u8]) -> Result<(), SessionError> {
        self.file_crc.update(bytes);
        self.out.write_all(bytes)?;
        Ok(())
    }

    fn record(&mut self, tag: u8, payload: &[u8]) -> Result<(), SessionError> {
        let mut head = [0u8; 5];
        head[0] = tag;
        head[1..].copy_from_slice(&(payload.len() as u32).to_le_bytes());
        let mut crc = Hasher::new();
        crc.update(&head);
        crc.update(payload);
        let crc = crc.finalize();
        self.put(&head)?;
        self.put(payload)?;
        self.put(&crc.to_le_bytes())
    }

    pub fn write_block(&mut self, block: &SampleBlock) -> Result<(), SessionError> {
        if block.fs != self.header.fs {
            return Err(SessionError::InconsistentRate {
                expected: self.header.fs,
                found: block.fs,
            });
        }
        if self.last_seq.is_some_and(|s| block.seq <= s) {
            return Err(SessionError::Malformed(format!(
                "block seq {} does not follow {}",
                block.seq,
                self.last_seq.unwrap_or_default()
            )));
        }
        self.record(TAG_BLOCK, &encode_block(block))?;
        self.last_seq = Some(block.seq);
        self.blocks += 1;
        self.samples += block.len() as u64;
        Ok(())
    }

    /// Adds a marker at `time_s` seconds from the start of the recording.
    pub fn annotate(&mut self, time_s: f64, text: &str) -> Result<(), SessionError> {
        self.record(TAG_ANNOTATION, &encode_annotation(time_s, text))?;
        self.annotations += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), SessionError> {
        self.out.flush()?;
        Ok(())
    }

    /// Writes the footer and returns the underlying writer.
    pub fn finish(mut self) -> Result<W, SessionError> {
        let footer = Footer {
            blocks: self.blocks,
            samples: self.samples,
            annotations: self.annotations,
            file_crc: self.file_crc.clone().finalize(),
        };
        self.record(TAG_FOOTER, &footer.encode())?;
        self.out.flush()?;
        Ok(self.out)
    }
}
