use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_ELECTRODE: &str = "Ag/AgCl dry";

/// JSON session header. Fields this version does not know are kept in
/// `extra` and written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub format_version: u16,
    /// RFC 3339 creation time.
    pub created_at: String,
    pub fs: u32,
    pub channel_labels: Vec<String>,
    /// Channel gains in force when recording started.
    pub gains: Vec<u32>,
    /// Reference voltage in volts.
    pub vref: f64,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default = "default_electrode")]
    pub electrode: String,
    pub block_len: usize,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

fn default_electrode() -> String {
    DEFAULT_ELECTRODE.to_string()
}

impl SessionHeader {
    pub fn new(fs: u32, channel_labels: Vec<String>, gains: Vec<u32>, backend: &str, block_len: usize) -> Self {
        Self {
            format_version: crate::FORMAT_VERSION,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            fs,
            channel_labels,
            gains,
            vref: peeg_ads1299::DEFAULT_VREF,
            backend: backend.to_string(),
            scenario: None,
            electrode: default_electrode(),
            block_len,
            extra: Map::new(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), crate::SessionError> {
        let bad = |m: String| Err(crate::SessionError::Malformed(m));
        if self.channel_labels.len() != peeg_ads1299::CHANNELS {
            return bad(format!("{} channel labels, expected 8", self.channel_labels.len()));
        }
        if self.gains.len() != peeg_ads1299::CHANNELS {
            return bad(format!("{} gains, expected 8", self.gains.len()));
        }
        if let Some(g) = self.gains.iter().find(|&&g| peeg_ads1299::Gain::from_value(g).is_err()) {
            return bad(format!("gain {g} is not a converter gain"));
        }
        if peeg_ads1299::DataRate::from_sps(self.fs).is_err() {
            return bad(format!("rate {} SPS is not a converter rate", self.fs));
        }
        if !(self.vref.is_finite() && self.vref > 0.0) {
            return bad(format!("vref {} must be positive", self.vref));
        }
        Ok(())
    }
}
