use peeg_ads1299::{microvolts_to_code, ConversionParams, DataFrame, Gain, RegisterFile, CHANNELS, DEFAULT_VREF};
use peeg_synth::{GroundTruth, RenderStream, Scenario};

use crate::backend::{BackendKind, Capabilities, DeviceBackend, Poll};
use crate::AcquisitionError;

/// How rendered microvolts become codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeMode {
    /// Quantize at the current channel gains, like the real converter.
    Analog,
    /// Quantize at one fixed gain whatever the registers say, so identical
    /// codes flow before and after a gain change.
    Fixed(Gain),
}

/// Renders a scenario and quantizes it as the converter would.
pub struct SimulatorBackend {
    scenario: Scenario,
    stream: Option<RenderStream>,
    mode: CodeMode,
    vref: f64,
    params: [ConversionParams; CHANNELS],
}

impl SimulatorBackend {
    pub fn new(scenario: Scenario) -> Result<Self, AcquisitionError> {
        scenario
            .validate()
            .map_err(|e| AcquisitionError::BackendUnavailable(e.to_string()))?;
        Ok(Self {
            scenario,
            stream: None,
            mode: CodeMode::Analog,
            vref: DEFAULT_VREF,
            params: [ConversionParams::default(); CHANNELS],
        })
    }

    pub fn with_code_mode(mut self, mode: CodeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Ground truth of the rendered scenario; `None` before `open`.
    pub fn truth(&self) -> Option<&GroundTruth> {
        self.stream.as_ref().map(|s| s.truth())
    }

    fn set_gains(&mut self, rf: &RegisterFile) {
        for (c, p) in self.params.iter_mut().enumerate() {
            let gain = match self.mode {
                CodeMode::Analog => rf.gain_of(c),
                CodeMode::Fixed(g) => g,
            };
            *p = ConversionParams::new(self.vref, gain).expect("default vref is positive");
        }
    }
}

impl DeviceBackend for SimulatorBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Simulator
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            register_writes: true,
            mid_stream_rate_change: false,
            self_paced: false,
        }
    }

    fn open(&mut self, rf: &RegisterFile) -> Result<RegisterFile, AcquisitionError> {
        if rf.sample_rate() != self.scenario.fs {
            return Err(AcquisitionError::RateMismatch {
                configured: rf.sample_rate(),
                source_rate: self.scenario.fs,
            });
        }
        let stream = RenderStream::new(&self.scenario)
            .map_err(|e| AcquisitionError::BackendUnavailable(e.to_string()))?;
        self.stream = Some(stream);
        self.set_gains(rf);
        Ok(*rf)
    }

    fn poll(&mut self) -> Result<Poll, AcquisitionError> {
        let Some(stream) = self.stream.as_mut() else {
            return Err(AcquisitionError::Backend("simulator polled before open".into()));
        };
        Ok(match stream.next() {
            Some(uv) => {
                let mut codes = [0i32; CHANNELS];
                for (c, code) in codes.iter_mut().enumerate() {
                    *code = microvolts_to_code(uv[c], &self.params[c]);
                }
                Poll::Frame(DataFrame::new(codes))
            }
            None => Poll::End,
        })
    }

    fn write_register(&mut self, _addr: u8, _value: u8, rf: &RegisterFile) -> Result<(), AcquisitionError> {
        self.set_gains(rf);
        Ok(())
    }
}
