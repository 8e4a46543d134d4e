use peeg_ads1299::{Gain, CHANNELS};

/// A run of consecutive samples from all eight channels, converted under one
/// register configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub seq: u64,
    /// Nominal time of the first sample, from the sample count and `fs`.
    pub t0_ns: u64,
    /// Wall-clock capture time, nanoseconds since the Unix epoch.
    pub host_time_ns: u64,
    pub fs: u32,
    /// Register configuration epoch the block was converted under.
    pub epoch: u32,
    pub gains: [Gain; CHANNELS],
    pub vref: f64,
    /// Samples per channel discarded between the previous delivered block and this one.
    pub dropped_before: u64,
    /// Channel-major microvolts: channel `c` occupies `[c*len, (c+1)*len)`.
    pub data: Vec<f64>,
    /// Raw converter codes, same layout as `data`.
    pub codes: Vec<i32>,
}

impl SampleBlock {
    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.data.len() / CHANNELS
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_codes(&self, c: usize) -> &[i32] {
        let n = self.len();
        &self.codes[c * n..(c + 1) * n]
    }

    pub fn gain_values(&self) -> [u8; CHANNELS] {
        self.gains.map(|g| g.value() as u8)
    }
}
