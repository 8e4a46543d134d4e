use peeg_ads1299::{DataFrame, DataRate, Gain, RegisterFile, CHANNELS};

use crate::backend::{BackendKind, Capabilities, DeviceBackend, Poll};
use crate::AcquisitionError;

/// Recorded frames with the gains they were captured under.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayChunk {
    pub gains: [Gain; CHANNELS],
    pub frames: Vec<[i32; CHANNELS]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySource {
    pub fs: u32,
    pub vref: f64,
    pub chunks: Vec<ReplayChunk>,
}

impl ReplaySource {
    pub fn sample_count(&self) -> usize {
        self.chunks.iter().map(|c| c.frames.len()).sum()
    }
}

/// Plays a recording back frame by frame.
pub struct ReplayBackend {
    source: ReplaySource,
    chunk: usize,
    frame: usize,
    current: Option<[Gain; CHANNELS]>,
    rf: RegisterFile,
}

impl ReplayBackend {
    /// Fails unless every gain change in the recording falls on a multiple of
    /// `block_len`, since a block is converted under exactly one configuration.
    pub fn new(source: ReplaySource, block_len: usize) -> Result<Self, AcquisitionError> {
        let rate = DataRate::from_sps(source.fs)
            .map_err(|_| AcquisitionError::BackendUnavailable(format!("recorded rate {} SPS is not a converter rate", source.fs)))?;
        let mut offset = 0;
        let mut previous: Option<[Gain; CHANNELS]> = None;
        for chunk in &source.chunks {
            if previous.is_some_and(|g| g != chunk.gains) && offset % block_len.max(1) != 0 {
                return Err(AcquisitionError::InvalidBlockLen {
                    block_len,
                    reason: format!("recorded gain change at sample {offset} is not block aligned"),
                });
            }
            previous = Some(chunk.gains);
            offset += chunk.frames.len();
        }
        let rf = RegisterFile::default()
            .with_data_rate(rate)
            .map_err(|e| AcquisitionError::Backend(e.to_string()))?;
        Ok(Self {
            source,
            chunk: 0,
            frame: 0,
            current: None,
            rf,
        })
    }

    pub fn source(&self) -> &ReplaySource {
        &self.source
    }
}

impl DeviceBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            register_writes: false,
            mid_stream_rate_change: false,
            self_paced: false,
        }
    }

    fn open(&mut self, _rf: &RegisterFile) -> Result<RegisterFile, AcquisitionError> {
        self.chunk = 0;
        self.frame = 0;
        self.current = None;
        let gains = self.source.chunks.first().map(|c| c.gains);
        if let Some(gains) = gains {
            self.current = Some(gains);
            self.rf = with_gains(self.rf, &gains)?;
        }
        Ok(self.rf)
    }

    fn poll(&mut self) -> Result<Poll, AcquisitionError> {
        while let Some(chunk) = self.source.chunks.get(self.chunk) {
            if self.current != Some(chunk.gains) {
                self.current = Some(chunk.gains);
                self.rf = with_gains(self.rf, &chunk.gains)?;
                return Ok(Poll::Config(self.rf));
            }
            if let Some(codes) = chunk.frames.get(self.frame) {
                self.frame += 1;
                return Ok(Poll::Frame(DataFrame::new(*codes)));
            }
            self.chunk += 1;
            self.frame = 0;
        }
        Ok(Poll::End)
    }

    fn write_register(&mut self, _addr: u8, _value: u8, _rf: &RegisterFile) -> Result<(), AcquisitionError> {
        Err(AcquisitionError::Unsupported("register writes during replay".into()))
    }
}

fn with_gains(mut rf: RegisterFile, gains: &[Gain; CHANNELS]) -> Result<RegisterFile, AcquisitionError> {
    for (c, g) in gains.iter().enumerate() {
        rf = rf
            .with_gain(c, *g)
            .map_err(|e| AcquisitionError::Backend(e.to_string()))?;
    }
    Ok(rf)
}
