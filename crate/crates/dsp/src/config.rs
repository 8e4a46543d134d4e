use serde::{Deserialize, Serialize};

/// Every tunable of the analysis routines. `Default` holds the reference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DetectorConfig {
    pub alpha: AlphaConfig,
    pub blink: BlinkConfig,
    pub chew: ChewConfig,
    pub emg: EmgConfig,
    pub ecg: EcgConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaConfig {
    pub band_hz: (f64, f64),
    /// Welch segment length in seconds; 1.024 s is 256 samples at 250 SPS.
    pub window_s: f64,
    pub overlap: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            band_hz: (8.0, 12.0),
            window_s: 1.024,
            overlap: 0.5,
        }
    }
}

impl AlphaConfig {
    pub fn window_len(&self, fs: f64) -> usize {
        (self.window_s * fs).round().max(2.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkConfig {
    pub lowpass_hz: f64,
    pub lowpass_order: usize,
    /// Zero disables the slow-drift high-pass.
    pub detrend_hz: f64,
    /// Threshold in multiples of the median absolute deviation.
    pub mad_factor: f64,
    pub refractory_s: f64,
}

impl Default for BlinkConfig {
    fn default() -> Self {
        Self {
            lowpass_hz: 5.0,
            lowpass_order: 4,
            detrend_hz: 0.0,
            mad_factor: 6.0,
            refractory_s: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChewConfig {
    pub band_hz: (f64, f64),
    pub order: usize,
    pub window_s: f64,
    pub hop_s: f64,
    pub mad_factor: f64,
    pub min_duration_s: f64,
    /// Bursts separated by less than this are one event.
    pub merge_gap_s: f64,
}

impl Default for ChewConfig {
    fn default() -> Self {
        Self {
            band_hz: (4.0, 40.0),
            order: 8,
            window_s: 0.2,
            hop_s: 0.1,
            mad_factor: 5.0,
            min_duration_s: 0.2,
            merge_gap_s: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmgConfig {
    pub band_hz: (f64, f64),
    pub order: usize,
    pub envelope_s: f64,
    pub baseline_percentile: f64,
    pub factor: f64,
    pub min_duration_s: f64,
    pub merge_gap_s: f64,
}

impl Default for EmgConfig {
    fn default() -> Self {
        Self {
            band_hz: (20.0, 120.0),
            order: 4,
            envelope_s: 0.05,
            baseline_percentile: 10.0,
            factor: 3.0,
            min_duration_s: 0.1,
            merge_gap_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcgConfig {
    pub band_hz: (f64, f64),
    pub order: usize,
    pub integration_s: f64,
    pub refractory_s: f64,
    /// Threshold learning period at the start of the record.
    pub learning_s: f64,
    /// Missed-beat search starts after this multiple of the mean RR interval.
    pub searchback_factor: f64,
    /// Half-width of the window around an integrator peak searched for the R apex.
    pub locate_s: f64,
}

impl Default for EcgConfig {
    fn default() -> Self {
        Self {
            band_hz: (5.0, 15.0),
            order: 4,
            integration_s: 0.15,
            refractory_s: 0.2,
            learning_s: 2.0,
            searchback_factor: 1.66,
            locate_s: 0.1,
        }
    }
}
