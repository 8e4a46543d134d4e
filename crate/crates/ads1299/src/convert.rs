use crate::frame::{CODE_MAX, CODE_MIN};
use crate::registers::Gain;

/// Internal reference voltage of the converter, in volts.
pub const DEFAULT_VREF: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionParams {
    vref: f64,
    pub gain: Gain,
}

impl ConversionParams {
    /// Returns `None` unless `vref` is finite and positive.
    pub fn new(vref: f64, gain: Gain) -> Option<Self> {
        (vref.is_finite() && vref > 0.0).then_some(Self { vref, gain })
    }

    pub fn vref(&self) -> f64 {
        self.vref
    }
}

impl Default for ConversionParams {
    fn default() -> Self {
        Self {
            vref: DEFAULT_VREF,
            gain: Gain::X24,
        }
    }
}

/// Converts a signed 24-bit code to microvolts at the electrode.
///
/// Positive full scale (`2^23 - 1`) maps to exactly `vref / gain`; the most
/// negative code lands one LSB past `-vref / gain`.
pub fn code_to_microvolts(code: i32, params: &ConversionParams) -> f64 {
    let vref_uv = params.vref * 1e6;
    // Value at the highest gain, trimmed to 51 significant bits. Every factor
    // 24/g is 3·2^k, so scaling the trimmed value up is exact, and gains with
    // an integer ratio relate by exactly that ratio, multiplied or divided.
    let at_max_gain = f64::from(code) * vref_uv / f64::from(CODE_MAX) / f64::from(MAX_GAIN);
    trim_two_bits(at_max_gain) * f64::from(MAX_GAIN / params.gain.value())
}

const MAX_GAIN: u32 = 24;

/// Rounds the magnitude to a multiple of four units in the last place.
fn trim_two_bits(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    f64::from_bits((x.to_bits() + 2) & !3)
}

/// Quantizes an input voltage to the nearest code, saturating at the rails.
pub fn microvolts_to_code(microvolts: f64, params: &ConversionParams) -> i32 {
    let vref_uv = params.vref * 1e6;
    let scaled = microvolts * f64::from(params.gain.value()) * f64::from(CODE_MAX) / vref_uv;
    if scaled.is_nan() {
        return 0;
    }
    scaled.round().clamp(f64::from(CODE_MIN), f64::from(CODE_MAX)) as i32
}
