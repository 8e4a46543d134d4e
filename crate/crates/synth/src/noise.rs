//! Seeded noise sources.
//!
//! White samples come from ChaCha8 through a standard normal transform.
//! Pink noise is Paul Kellet's refined 1/f filter (seven fixed first-order
//! terms) followed by a first-order 1 Hz DC blocker, scaled so its
//! stationary RMS equals the requested value. Band noise is white noise
//! through two cascaded 2nd-order high-pass and two 2nd-order low-pass RBJ
//! sections, normalized to unit RMS.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct WhiteNoise {
    rng: ChaCha8Rng,
}

impl WhiteNoise {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_sample(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

const KELLET_POLES: [f64; 6] = [0.99886, 0.99332, 0.96900, 0.86650, 0.55000, -0.7616];
const KELLET_INPUT: [f64; 6] = [0.0555179, 0.0750759, 0.1538520, 0.3104856, 0.5329522, -0.0168980];
const KELLET_DIRECT: f64 = 0.5362;
const KELLET_DELAYED: f64 = 0.115926;

/// Unit-variance 1/f noise, high-passed at [`PinkNoise::HIGHPASS_HZ`].
pub struct PinkNoise {
    white: WhiteNoise,
    kellet: Kellet,
    blocker: DcBlocker,
    scale: f64,
}

#[derive(Default)]
struct Kellet {
    state: [f64; 6],
    delayed: f64,
}

impl Kellet {
    fn step(&mut self, w: f64) -> f64 {
        let mut sum = 0.0;
        for ((s, pole), input) in self.state.iter_mut().zip(KELLET_POLES).zip(KELLET_INPUT) {
            *s = pole * *s + w * input;
            sum += *s;
        }
        let out = sum + self.delayed + w * KELLET_DIRECT;
        self.delayed = w * KELLET_DELAYED;
        out
    }
}

struct DcBlocker {
    pole: f64,
    x1: f64,
    y1: f64,
}

impl DcBlocker {
    fn new(fs: f64, corner_hz: f64) -> Self {
        Self {
            pole: (-2.0 * PI * corner_hz / fs).exp(),
            x1: 0.0,
            y1: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = x - self.x1 + self.pole * self.y1;
        self.x1 = x;
        self.y1 = y;
        y
    }
}

impl PinkNoise {
    pub const HIGHPASS_HZ: f64 = 1.0;

    pub fn new(seed: u64, fs: f64) -> Self {
        let mut pink = Self {
            white: WhiteNoise::new(seed),
            kellet: Kellet::default(),
            blocker: DcBlocker::new(fs, Self::HIGHPASS_HZ),
            scale: 1.0 / impulse_rms(fs),
        };
        for _ in 0..warmup_len(fs) {
            pink.next_sample();
        }
        pink
    }

    pub fn next_sample(&mut self) -> f64 {
        let w = self.white.next_sample();
        self.blocker.step(self.kellet.step(w)) * self.scale
    }
}

/// Long enough for the slowest of the Kellet poles and the DC blocker to settle.
fn warmup_len(fs: f64) -> usize {
    let blocker_tau = fs / (2.0 * PI * PinkNoise::HIGHPASS_HZ);
    (20.0 * blocker_tau.max(1.0 / (1.0 - KELLET_POLES[0]))).ceil() as usize
}

/// RMS of the cascade driven by unit white noise: root of the summed squared impulse response.
fn impulse_rms(fs: f64) -> f64 {
    let mut kellet = Kellet::default();
    let mut blocker = DcBlocker::new(fs, PinkNoise::HIGHPASS_HZ);
    let mut energy = 0.0;
    for n in 0..warmup_len(fs) {
        let h = blocker.step(kellet.step(if n == 0 { 1.0 } else { 0.0 }));
        energy += h * h;
    }
    energy.sqrt()
}

#[derive(Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    fn rbj(fs: f64, f0: f64, highpass: bool) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let cos = w0.cos();
        let a0 = 1.0 + alpha;
        let b = if highpass {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            z: [0.0; 2],
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

/// Renders `len` samples of unit-RMS band-limited noise between `low_hz` and `high_hz`.
///
/// The high edge is clamped to 0.45·fs so the design stays well below Nyquist.
pub fn band_noise(seed: u64, fs: f64, low_hz: f64, high_hz: f64, len: usize) -> Vec<f64> {
    let high = high_hz.min(0.45 * fs);
    let low = low_hz.min(high * 0.5);
    let mut sections = [
        Biquad::rbj(fs, low, true),
        Biquad::rbj(fs, low, true),
        Biquad::rbj(fs, high, false),
        Biquad::rbj(fs, high, false),
    ];
    let mut white = WhiteNoise::new(seed);
    let warmup = (fs / low * 4.0).ceil() as usize;
    let mut out = Vec::with_capacity(len);
    for i in 0..warmup + len {
        let y = sections
            .iter_mut()
            .fold(white.next_sample(), |acc, s| s.step(acc));
        if i >= warmup {
            out.push(y);
        }
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / out.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn impulse_energy_matches_closed_form_without_blocker() {
        // sum over i,j of c_i c_j / (1 - p_i p_j), plus the direct and delayed taps
        let c = KELLET_INPUT;
        let p = KELLET_POLES;
        let mut total = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                total += c[i] * c[j] / (1.0 - p[i] * p[j]);
            }
        }
        let h0: f64 = c.iter().sum();
        let h1: f64 = c.iter().zip(p).map(|(c, p)| c * p).sum();
        total += (h0 + KELLET_DIRECT).powi(2) - h0 * h0;
        total += (h1 + KELLET_DELAYED).powi(2) - h1 * h1;

        let mut kellet = Kellet::default();
        let brute: f64 = (0..200_000)
            .map(|n| kellet.step(if n == 0 { 1.0 } else { 0.0 }).powi(2))
            .sum();
        assert!((brute - total).abs() < 1e-9 * total);
    }

    #[test]
    fn pink_noise_is_unit_rms() {
        let mut p = PinkNoise::new(3, 250.0);
        let x: Vec<f64> = (0..250 * 600).map(|_| p.next_sample()).collect();
        let r = rms(&x);
        assert!((r - 1.0).abs() < 0.1, "rms {r}");
    }

    #[test]
    fn band_noise_is_unit_rms_and_deterministic() {
        let a = band_noise(11, 250.0, 20.0, 120.0, 5000);
        let b = band_noise(11, 250.0, 20.0, 120.0, 5000);
        assert_eq!(a, b);
        assert!((rms(&a) - 1.0).abs() < 1e-12);
    }
}
