use std::f64::consts::PI;

use peeg_dsp::{hann, welch_psd, DspError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sine(freq: f64, amp: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
        .collect()
}

#[test]
fn sine_peak_bin() {
    let s = welch_psd(&sine(10.0, 20.0, 250.0, 2048), 250.0, 256, 0.5).unwrap();
    assert!((s.peak_frequency() - 10.0).abs() <= 0.5);
}

#[test]
fn sine_bandpower_matches_parseval() {
    let s = welch_psd(&sine(10.0, 20.0, 250.0, 2048), 250.0, 256, 0.5).unwrap();
    let p = s.bandpower(8.0, 12.0).unwrap();
    assert!((p - 200.0).abs() <= 0.05 * 200.0, "{p}");
}

#[test]
fn hann_leakage_outside_the_band() {
    let s = welch_psd(&sine(10.0, 20.0, 250.0, 2048), 250.0, 256, 0.5).unwrap();
    let inside = s.bandpower(8.0, 12.0).unwrap();
    let outside = s.bandpower(15.0, 20.0).unwrap();
    assert!(outside <= 0.01 * inside, "{outside} vs {inside}");
}

/// A sine centred on bin k leaves power only in bins k-1, k, k+1 under a
/// periodic Hann window, in ratio 1/4 : 1 : 1/4 of the periodogram.
#[test]
fn on_bin_sine_matches_window_transform() {
    let (fs, n) = (256.0, 256);
    let s = welch_psd(&sine(32.0, 1.0, fs, n), fs, n, 0.0).unwrap();
    let w: Vec<f64> = hann(n);
    let energy: f64 = w.iter().map(|v| v * v).sum();
    // |X[k]| = A·N/4 for the centre bin, A·N/8 for the neighbours
    let centre = 2.0 * (n as f64 / 4.0).powi(2) / (fs * energy);
    let side = 2.0 * (n as f64 / 8.0).powi(2) / (fs * energy);
    assert!((s.psd[32] - centre).abs() < 1e-12);
    assert!((s.psd[31] - side).abs() < 1e-12);
    assert!((s.psd[33] - side).abs() < 1e-12);
    for (k, p) in s.psd.iter().enumerate() {
        if !(31..=33).contains(&k) {
            assert!(*p < 1e-20, "bin {k}: {p}");
        }
    }
}

#[test]
fn white_noise_integral_is_variance() {
    for seed in 0..20u64 {
        let sigma = 7.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let x: Vec<f64> = (0..8192).map(|_| normal.sample(&mut rng)).collect();
        let s = welch_psd(&x, 250.0, 256, 0.5).unwrap();
        let total = s.bandpower(0.0, 125.0).unwrap();
        let var = sigma * sigma;
        assert!(
            (0.9 * var..=1.1 * var).contains(&total),
            "seed {seed}: {total} vs {var}"
        );
    }
}

/// The Hann main lobe spans the DC bin and its neighbour; nothing reaches further.
#[test]
fn constant_signal_stays_at_zero_frequency() {
    let s = welch_psd(&[3.0; 1024], 250.0, 256, 0.5).unwrap();
    assert_eq!(s.peak_frequency(), 0.0);
    assert!(s.psd[2..].iter().all(|&p| p < 1e-20));
    assert!(s.psd[0] > s.psd[1]);
}

#[test]
fn density_is_non_negative_and_grid_is_uniform() {
    let x: Vec<f64> = (0..3000).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
    let s = welch_psd(&x, 500.0, 300, 0.25).unwrap();
    assert!(s.psd.iter().all(|&p| p >= 0.0));
    assert_eq!(s.freqs[0], 0.0);
    assert_eq!(*s.freqs.last().unwrap(), 250.0);
    for pair in s.freqs.windows(2) {
        assert!((pair[1] - pair[0] - 500.0 / 300.0).abs() < 1e-9);
    }
}

#[test]
fn argument_checks() {
    assert!(matches!(
        welch_psd(&[0.0; 100], 250.0, 256, 0.5),
        Err(DspError::TooShort { .. })
    ));
    assert!(welch_psd(&[0.0; 300], 250.0, 256, 1.0).is_err());
    assert!(welch_psd(&[0.0; 300], 250.0, 256, -0.1).is_err());
}
