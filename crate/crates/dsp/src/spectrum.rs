//! Welch power spectral density and band power.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::DspError;

/// One-sided power spectral density, in input units squared per hertz.
/// `freqs` runs from 0 to `fs/2` in steps of `fs / window_len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub fs: f64,
    pub window_len: usize,
    pub overlap: f64,
    pub segments: usize,
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate with a periodic Hann window, no detrending and density scaling.
///
/// `overlap` is the fraction of `window` shared by consecutive segments, in `[0, 1)`.
pub fn welch_psd(x: &[f64], fs: f64, window: usize, overlap: f64) -> Result<Spectrum, DspError> {
    if window < 2 {
        return Err(DspError::InvalidSpec(format!("window {window} too short")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(DspError::InvalidSpec(format!("overlap {overlap} outside [0, 1)")));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(DspError::InvalidSpec(format!("sample rate {fs} must be positive")));
    }
    if x.len() < window {
        return Err(DspError::TooShort {
            needed: window,
            got: x.len(),
        });
    }
    let step = ((window as f64 * (1.0 - overlap)).round() as usize).max(1);
    let w = hann(window);
    let w_energy: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::new().plan_fft_forward(window);
    let bins = window / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::default(); window];
    let mut segments = 0;
    let mut start = 0;
    while start + window <= x.len() {
        for ((b, &xv), &wv) in buf.iter_mut().zip(&x[start..start + window]).zip(&w) {
            *b = Complex64::new(xv * wv, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (fs * w_energy * segments as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = k != 0 && !(window % 2 == 0 && k == window / 2);
            p * scale * if one_sided { 2.0 } else { 1.0 }
        })
        .collect();
    let freqs = (0..bins).map(|k| k as f64 * fs / window as f64).collect();
    Ok(Spectrum {
        freqs,
        psd,
        fs,
        window_len: window,
        overlap,
        segments,
    })
}

impl Spectrum {
    /// Trapezoidal integral of the density over `[low_hz, high_hz]`, interpolating at the edges.
    ///
    /// Requires `0 <= low_hz < high_hz <= fs/2`.
    pub fn bandpower(&self, low_hz: f64, high_hz: f64) -> Result<f64, DspError> {
        let nyquist = self.fs / 2.0;
        if !(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist) {
            return Err(DspError::BadBand { low_hz, high_hz });
        }
        let last = *self.freqs.last().unwrap_or(&0.0);
        let (lo, hi) = (low_hz, high_hz.min(last));
        if self.freqs.len() < 2 || !(hi > lo) {
            return Ok(0.0);
        }
        let at = |f: f64| -> f64 {
            let df = self.freqs[1];
            let k = ((f / df).floor() as usize).min(self.freqs.len() - 2);
            let t = (f - self.freqs[k]) / df;
            self.psd[k] * (1.0 - t) + self.psd[k + 1] * t
        };
        let mut points = vec![(lo, at(lo))];
        points.extend(
            self.freqs
                .iter()
                .zip(&self.psd)
                .filter(|(&f, _)| f > lo && f < hi)
                .map(|(&f, &d)| (f, d)),
        );
        points.push((hi, at(hi)));
        Ok(points
            .windows(2)
            .map(|p| (p[1].0 - p[0].0) * (p[0].1 + p[1].1) / 2.0)
            .sum())
    }

    /// Integral over `[0, fs/2]`.
    pub fn total_power(&self) -> f64 {
        self.bandpower(0.0, self.fs / 2.0).unwrap_or(0.0)
    }

    /// Frequency of the largest density bin.
    pub fn peak_frequency(&self) -> f64 {
        let k = (0..self.psd.len())
            .max_by(|&a, &b| self.psd[a].total_cmp(&self.psd[b]))
            .unwrap_or(0);
        self.freqs[k]
    }
}

/// Welch band power of `x` over `[low_hz, high_hz]`.
pub fn bandpower(
    x: &[f64],
    fs: f64,
    window: usize,
    overlap: f64,
    low_hz: f64,
    high_hz: f64,
) -> Result<f64, DspError> {
    welch_psd(x, fs, window, overlap)?.bandpower(low_hz, high_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_is_periodic() {
        let w = hann(8);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-15);
        assert!((w[1] - w[7]).abs() < 1e-15);
    }

    #[test]
    fn segment_count() {
        let x = vec![0.0; 2048];
        assert_eq!(welch_psd(&x, 250.0, 256, 0.5).unwrap().segments, 15);
        assert_eq!(welch_psd(&x, 250.0, 256, 0.0).unwrap().segments, 8);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            welch_psd(&[0.0; 10], 250.0, 256, 0.5),
            Err(DspError::TooShort { needed: 256, got: 10 })
        ));
    }

    #[test]
    fn bandpower_of_flat_density_is_width() {
        let s = Spectrum {
            freqs: (0..11).map(f64::from).collect(),
            psd: vec![2.0; 11],
            fs: 20.0,
            window_len: 20,
            overlap: 0.0,
            segments: 1,
        };
        assert!((s.bandpower(2.5, 7.25).unwrap() - 9.5).abs() < 1e-12);
        assert!((s.total_power() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn bad_bands() {
        let s = welch_psd(&[1.0; 256], 250.0, 256, 0.5).unwrap();
        for (lo, hi) in [(7.0, 7.0), (9.0, 8.0), (-1.0, 8.0), (8.0, 126.0)] {
            assert_eq!(
                s.bandpower(lo, hi),
                Err(DspError::BadBand { low_hz: lo, high_hz: hi })
            );
        }
    }
}
