//! QRS detection after Pan and Tompkins.
//!
//! Band-pass, five-point derivative, squaring and moving-window integration,
//! then adaptive signal/noise peak levels with a refractory period and a
//! searchback for missed beats. R apexes are located on the band-passed
//! signal around each accepted integrator peak.

use serde::{Deserialize, Serialize};

use crate::artifacts::{ratio_or_one, require_seconds, EventKind, EventList};
use crate::config::EcgConfig;
use crate::filter::{design_filter, FilterSpec};
use crate::stats::median;
use crate::DspError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgReport {
    pub peaks: EventList,
    /// 60 / median RR interval; `None` with fewer than two peaks.
    pub mean_hr: Option<f64>,
}

/// Needs at least five seconds of input.
pub fn detect_r_peaks(x: &[f64], fs: f64, cfg: &EcgConfig) -> Result<EcgReport, DspError> {
    require_seconds(x, fs, 5.0)?;
    let mut peaks = EventList::new(EventKind::RPeak);
    let bp = design_filter(&FilterSpec::bandpass(cfg.band_hz.0, cfg.band_hz.1, cfg.order, fs))?;
    let filtered = bp.filtfilt(x);
    let n = filtered.len();

    let mut deriv = vec![0.0; n];
    for i in 2..n - 2 {
        deriv[i] = (2.0 * filtered[i + 2] + filtered[i + 1] - filtered[i - 1] - 2.0 * filtered[i - 2])
            * fs
            / 8.0;
    }
    let squared: Vec<f64> = deriv.iter().map(|d| d * d).collect();
    let width = ((cfg.integration_s * fs).round() as usize).max(1);
    let mwi = centred_mean(&squared, width);

    let refractory = ((cfg.refractory_s * fs).round() as usize).max(1);
    let candidates = local_maxima(&mwi, refractory);

    let learn = ((cfg.learning_s * fs).round() as usize).clamp(1, n);
    let head = &mwi[..learn];
    let mut spki = 0.25 * head.iter().copied().fold(0.0, f64::max);
    let mut npki = 0.5 * head.iter().sum::<f64>() / learn as f64;

    let mut accepted: Vec<usize> = Vec::new();
    let mut rejected: Vec<usize> = Vec::new();
    let mut thresholds: Vec<f64> = Vec::new();
    for &c in &candidates {
        let thr = npki + 0.25 * (spki - npki);
        if let (Some(&last), Some(rr)) = (accepted.last(), mean_rr(&accepted)) {
            let limit = (cfg.searchback_factor * rr).round() as usize;
            if c - last > limit {
                let missed = rejected
                    .iter()
                    .copied()
                    .filter(|&r| r > last + refractory && c >= r + refractory && mwi[r] > 0.5 * thr)
                    .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                if let Some(m) = missed {
                    accepted.push(m);
                    thresholds.push(0.5 * thr);
                    spki = 0.25 * mwi[m] + 0.75 * spki;
                }
            }
        }
        let spaced = accepted.last().map_or(true, |&last| c >= last + refractory);
        if mwi[c] > thr && spaced {
            accepted.push(c);
            thresholds.push(thr);
            spki = 0.125 * mwi[c] + 0.875 * spki;
        } else {
            rejected.push(c);
            npki = 0.125 * mwi[c] + 0.875 * npki;
        }
    }

    let half = (cfg.locate_s * fs).round() as usize;
    let mut located: Vec<(usize, f64)> = Vec::with_capacity(accepted.len());
    for (&c, &thr) in accepted.iter().zip(&thresholds) {
        let lo = c.saturating_sub(half);
        let hi = (c + half + 1).min(n);
        let apex = (lo..hi)
            .max_by(|&a, &b| filtered[a].abs().total_cmp(&filtered[b].abs()))
            .unwrap_or(c);
        match located.last() {
            Some(&(prev, _)) if apex < prev + refractory => {}
            _ => located.push((apex, ratio_or_one(mwi[c], thr))),
        }
    }
    for &(i, score) in &located {
        peaks.push(i as f64 / fs, score);
    }
    let rr: Vec<f64> = peaks.times_s.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_hr = (!rr.is_empty()).then(|| 60.0 / median(&rr));
    Ok(EcgReport { peaks, mean_hr })
}

fn mean_rr(accepted: &[usize]) -> Option<f64> {
    let recent = &accepted[accepted.len().saturating_sub(9)..];
    if recent.len() < 2 {
        return None;
    }
    Some((recent[recent.len() - 1] - recent[0]) as f64 / (recent.len() - 1) as f64)
}

fn centred_mean(x: &[f64], width: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect()
}

/// Strictly positive samples that are the maximum within `±radius` (first index wins ties).
fn local_maxima(x: &[f64], radius: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..x.len() {
        if x[i] <= 0.0 {
            continue;
        }
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(x.len());
        let is_max = (lo..hi).all(|j| x[j] < x[i] || (x[j] == x[i] && j >= i));
        if is_max {
            out.push(i);
        }
    }
    out
}
