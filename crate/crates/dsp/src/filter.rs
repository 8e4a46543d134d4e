//! Butterworth IIR design as cascaded second-order sections.
//!
//! The analog prototype poles `exp(jπ(2k+N+1)/2N)` are frequency-transformed
//! (lowpass, highpass, bandpass or bandstop) at pre-warped edge frequencies,
//! mapped through the bilinear transform, and paired into biquads. The
//! overall gain is normalized to unity at DC (lowpass, bandstop), Nyquist
//! (highpass) or the band centre (bandpass).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::DspError;

/// Largest pole radius accepted for a designed filter.
pub const MAX_POLE_RADIUS: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Bandpass,
    Notch,
    Highpass,
    Lowpass,
}

/// Filter request. `order` is the total filter order (number of poles), even and ≥ 2.
///
/// Lowpass uses `high_hz` as its cutoff, highpass uses `low_hz`; bandpass and
/// notch use both edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub fs: f64,
}

impl FilterSpec {
    pub fn bandpass(low_hz: f64, high_hz: f64, order: usize, fs: f64) -> Self {
        Self {
            kind: FilterKind::Bandpass,
            low_hz,
            high_hz,
            order,
            fs,
        }
    }

    pub fn lowpass(cutoff_hz: f64, order: usize, fs: f64) -> Self {
        Self {
            kind: FilterKind::Lowpass,
            low_hz: 0.0,
            high_hz: cutoff_hz,
            order,
            fs,
        }
    }

    pub fn highpass(cutoff_hz: f64, order: usize, fs: f64) -> Self {
        Self {
            kind: FilterKind::Highpass,
            low_hz: cutoff_hz,
            high_hz: 0.0,
            order,
            fs,
        }
    }

    /// Second-order band-stop centred on `centre_hz` with a `width_hz` wide stopband.
    pub fn notch(centre_hz: f64, width_hz: f64, fs: f64) -> Self {
        Self {
            kind: FilterKind::Notch,
            low_hz: centre_hz - width_hz / 2.0,
            high_hz: centre_hz + width_hz / 2.0,
            order: 2,
            fs,
        }
    }

    fn validate(&self) -> Result<(), DspError> {
        let invalid = |m: String| Err(DspError::InvalidSpec(m));
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return invalid(format!("sample rate {} must be positive", self.fs));
        }
        if self.order < 2 || self.order % 2 != 0 {
            return invalid(format!("order {} must be even and at least 2", self.order));
        }
        let nyquist = self.fs / 2.0;
        let edges: &[f64] = match self.kind {
            FilterKind::Lowpass => &[self.high_hz],
            FilterKind::Highpass => &[self.low_hz],
            FilterKind::Bandpass | FilterKind::Notch => &[self.low_hz, self.high_hz],
        };
        for &edge in edges {
            if !edge.is_finite() || edge <= 0.0 {
                return invalid(format!("edge frequency {edge} must be positive"));
            }
            if edge >= nyquist {
                return Err(DspError::NyquistViolation {
                    edge_hz: edge,
                    nyquist_hz: nyquist,
                });
            }
        }
        if edges.len() == 2 && self.low_hz >= self.high_hz {
            return invalid(format!(
                "low edge {} must be below high edge {}",
                self.low_hz, self.high_hz
            ));
        }
        Ok(())
    }
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Pole pair of `1 + a1 z^-1 + a2 z^-2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a[0] * self.a[0] - 4.0 * self.a[1], 0.0).sqrt();
        [(-self.a[0] + disc) / 2.0, (-self.a[0] - disc) / 2.0]
    }
}

/// A designed filter: its request plus the cascade of sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

pub fn design_filter(spec: &FilterSpec) -> Result<FilterCoefficients, DspError> {
    spec.validate()?;
    let fs2 = 2.0 * spec.fs;
    let warp = |f: f64| fs2 * (PI * f / spec.fs).tan();
    let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);

    let prototype_order = match spec.kind {
        FilterKind::Lowpass | FilterKind::Highpass => spec.order,
        FilterKind::Bandpass | FilterKind::Notch => spec.order / 2,
    };
    let prototype: Vec<Complex64> = (0..prototype_order)
        .map(|k| {
            let theta = PI * (2 * k + prototype_order + 1) as f64 / (2 * prototype_order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect();

    let mut analog = Vec::with_capacity(spec.order);
    let numerator: [f64; 3];
    let reference_z: Complex64;
    match spec.kind {
        FilterKind::Lowpass => {
            let wc = warp(spec.high_hz);
            analog.extend(prototype.iter().map(|p| p * wc));
            numerator = [1.0, 2.0, 1.0];
            reference_z = Complex64::new(1.0, 0.0);
        }
        FilterKind::Highpass => {
            let wc = warp(spec.low_hz);
            analog.extend(prototype.iter().map(|p| wc / p));
            numerator = [1.0, -2.0, 1.0];
            reference_z = Complex64::new(-1.0, 0.0);
        }
        FilterKind::Bandpass => {
            let (w1, w2) = (warp(spec.low_hz), warp(spec.high_hz));
            let (bw, w0) = (w2 - w1, (w1 * w2).sqrt());
            for p in &prototype {
                let half = p * bw / 2.0;
                let root = (half * half - w0 * w0).sqrt();
                analog.push(half + root);
                analog.push(half - root);
            }
            numerator = [1.0, 0.0, -1.0];
            let centre = (w0 / fs2).atan() * 2.0;
            reference_z = Complex64::from_polar(1.0, centre);
        }
        FilterKind::Notch => {
            let (w1, w2) = (warp(spec.low_hz), warp(spec.high_hz));
            let (bw, w0) = (w2 - w1, (w1 * w2).sqrt());
            for p in &prototype {
                let half = (bw / 2.0) / p;
                let root = (half * half - w0 * w0).sqrt();
                analog.push(half + root);
                analog.push(half - root);
            }
            let zero = bilinear(Complex64::new(0.0, w0));
            numerator = [1.0, -2.0 * zero.re, zero.norm_sqr()];
            reference_z = Complex64::new(1.0, 0.0);
        }
    }

    let digital: Vec<Complex64> = analog.into_iter().map(bilinear).collect();
    let mut sections = pair_poles(&digital)
        .into_iter()
        .map(|a| Biquad { b: numerator, a })
        .collect::<Vec<_>>();

    let z_inv = reference_z.inv();
    let gain = sections
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
        .norm();
    if !(gain.is_finite() && gain > 0.0) {
        return Err(DspError::UnstableDesign { max_pole_radius: f64::NAN });
    }
    for coeff in sections[0].b.iter_mut() {
        *coeff /= gain;
    }

    let coeffs = FilterCoefficients {
        spec: *spec,
        sections,
    };
    let radius = coeffs.max_pole_radius();
    if !(radius < MAX_POLE_RADIUS) {
        return Err(DspError::UnstableDesign {
            max_pole_radius: radius,
        });
    }
    Ok(coeffs)
}

/// Groups digital poles into denominator pairs: conjugate pairs first, then real poles two at a time.
fn pair_poles(poles: &[Complex64]) -> Vec<[f64; 2]> {
    const IMAG_EPS: f64 = 1e-12;
    let mut out = Vec::with_capacity(poles.len() / 2);
    let mut real = Vec::new();
    for p in poles {
        if p.im > IMAG_EPS {
            out.push([-2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= IMAG_EPS {
            real.push(p.re);
        }
    }
    real.sort_by(f64::total_cmp);
    for pair in real.chunks(2) {
        match pair {
            [r1, r2] => out.push([-(r1 + r2), r1 * r2]),
            // unreachable for even orders; keep it first-order-in-a-biquad if it happens
            [r] => out.push([-r, 0.0]),
            _ => {}
        }
    }
    out
}

impl FilterCoefficients {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.spec.fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Causal filtering from rest.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut state = FilterState::new(self);
        x.iter().map(|&v| state.step(v)).collect()
    }

    /// Forward-backward filtering with odd-extension padding and steady-state
    /// initial conditions; squares the magnitude response and cancels phase.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut state = FilterState::steady(self, ext[0]);
        let mut y: Vec<f64> = ext.iter().map(|&v| state.step(v)).collect();
        y.reverse();
        let mut state = FilterState::steady(self, y[0]);
        for v in y.iter_mut() {
            *v = state.step(*v);
        }
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Running state of a section cascade (transposed direct form II).
#[derive(Debug, Clone)]
pub struct FilterState {
    sections: Vec<Biquad>,
    z: Vec<[f64; 2]>,
}

impl FilterState {
    pub fn new(coeffs: &FilterCoefficients) -> Self {
        Self {
            sections: coeffs.sections.clone(),
            z: vec![[0.0; 2]; coeffs.sections.len()],
        }
    }

    /// State as if `level` had been applied forever.
    pub fn steady(coeffs: &FilterCoefficients, level: f64) -> Self {
        let mut state = Self::new(coeffs);
        let mut u = level;
        for (s, z) in state.sections.iter().zip(state.z.iter_mut()) {
            let y = s.dc_gain() * u;
            z[1] = s.b[2] * u - s.a[1] * y;
            z[0] = s.b[1] * u - s.a[0] * y + z[1];
            u = y;
        }
        state
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, z) in self.sections.iter().zip(self.z.iter_mut()) {
            let y = s.b[0] * v + z[0];
            z[0] = s.b[1] * v - s.a[0] * y + z[1];
            z[1] = s.b[2] * v - s.a[1] * y;
            v = y;
        }
        v
    }
}

/// Clamps a pass band's upper edge to 0.99·Nyquist, warning when it had to.
pub fn clamp_band(low_hz: f64, high_hz: f64, fs: f64) -> (f64, f64) {
    let ceiling = 0.99 * fs / 2.0;
    if high_hz > ceiling {
        log::warn!("band edge {high_hz} Hz clamped to {ceiling} Hz at fs {fs}");
        (low_hz.min(ceiling / 2.0), ceiling)
    } else {
        (low_hz, high_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nyquist_and_order_checks() {
        assert!(matches!(
            design_filter(&FilterSpec::bandpass(1.0, 125.0, 4, 250.0)),
            Err(DspError::NyquistViolation { .. })
        ));
        assert!(matches!(
            design_filter(&FilterSpec::lowpass(130.0, 4, 250.0)),
            Err(DspError::NyquistViolation { .. })
        ));
        assert!(matches!(
            design_filter(&FilterSpec::bandpass(1.0, 40.0, 3, 250.0)),
            Err(DspError::InvalidSpec(_))
        ));
        assert!(matches!(
            design_filter(&FilterSpec::bandpass(40.0, 1.0, 4, 250.0)),
            Err(DspError::InvalidSpec(_))
        ));
    }

    #[test]
    fn section_counts() {
        for order in [2, 4, 6, 8] {
            for spec in [
                FilterSpec::bandpass(1.0, 40.0, order, 250.0),
                FilterSpec::lowpass(5.0, order, 250.0),
                FilterSpec::highpass(0.5, order, 250.0),
            ] {
                assert_eq!(design_filter(&spec).unwrap().sections.len(), order / 2);
            }
        }
    }

    #[test]
    fn unit_gain_at_reference() {
        let lp = design_filter(&FilterSpec::lowpass(5.0, 4, 250.0)).unwrap();
        assert!((lp.response(0.0).norm() - 1.0).abs() < 1e-12);
        let hp = design_filter(&FilterSpec::highpass(5.0, 4, 250.0)).unwrap();
        assert!((hp.response(125.0).norm() - 1.0).abs() < 1e-12);
        let n = design_filter(&FilterSpec::notch(50.0, 4.0, 250.0)).unwrap();
        assert!((n.response(0.0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_removes_startup_transient() {
        let lp = design_filter(&FilterSpec::lowpass(5.0, 4, 250.0)).unwrap();
        let mut state = FilterState::steady(&lp, 3.0);
        for _ in 0..100 {
            assert!((state.step(3.0) - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp_band(20.0, 120.0, 250.0), (20.0, 120.0));
        assert_eq!(clamp_band(20.0, 120.0, 200.0), (20.0, 99.0));
    }

    #[test]
    fn very_narrow_band_is_unstable() {
        let spec = FilterSpec::bandpass(0.01, 0.0101, 8, 16000.0);
        assert!(matches!(
            design_filter(&spec),
            Err(DspError::UnstableDesign { .. })
        ));
    }
}
