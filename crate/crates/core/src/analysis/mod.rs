//! Fringe fitting and fidelity statistics.

mod fit;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::FringeScan;

pub use fit::{fit_sinusoid, wrap_phase, FitOptions, SinusoidFit};

/// Fits with a reduced chi-square above this are discarded.
pub const DISCARD_REDUCED_CHI2: f64 = 5.0;

/// Window step as a fraction of the period.
pub const WINDOW_STEP_PERIODS: f64 = 0.25;

/// Minimum number of accepted windows for a distribution.
pub const MIN_WINDOWS: usize = 5;

/// `F = (1 + V) / 2`.
pub fn fidelity_from_visibility(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::arg(format!("visibility {v} outside [0, 1]")));
    }
    Ok(0.5 * (1.0 + v))
}

/// Removes `rate_hz` times the scan exposure from every point, flooring at
/// zero.
pub fn subtract_accidentals(scan: &FringeScan, rate_hz: f64) -> Result<FringeScan> {
    if !(rate_hz >= 0.0) {
        return Err(Error::arg("accidental rate must be nonnegative"));
    }
    let expected = rate_hz * scan.meta.exposure_s;
    Ok(subtract(scan, |_| expected))
}

/// Removes the per-point expected accidentals recorded in the scan.
pub fn subtract_recorded_accidentals(scan: &FringeScan) -> FringeScan {
    subtract(scan, |i| scan.accidentals[i])
}

fn subtract(scan: &FringeScan, expected: impl Fn(usize) -> f64) -> FringeScan {
    let mut out = scan.clone();
    for (i, c) in out.counts.iter_mut().enumerate() {
        *c = (*c - expected(i)).max(0.0);
    }
    out.meta.accidentals_subtracted = true;
    out
}

/// Fit of a whole scan (or segment).
pub fn fit_scan(scan: &FringeScan) -> Result<SinusoidFit> {
    fit_sinusoid(&scan.phases, &scan.counts, &FitOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianOverlay {
    pub mean: f64,
    pub sigma: f64,
}

impl GaussianOverlay {
    pub fn pdf(&self, x: f64) -> f64 {
        if !(self.sigma > 0.0) {
            return 0.0;
        }
        let z = (x - self.mean) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (std::f64::consts::TAU).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub mean: f64,
    /// Sample standard deviation (n - 1 normalization).
    pub sigma: f64,
    pub skewness: f64,
    pub samples: Vec<f64>,
    pub windows_total: usize,
    pub windows_discarded: usize,
    /// Period used to size the windows.
    pub period: f64,
    pub gaussian: GaussianOverlay,
}

/// Mean, sample standard deviation and sample skewness `m3 / m2^(3/2)`.
pub fn moments(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let m3 = samples.iter().map(|s| (s - mean).powi(3)).sum::<f64>() / n;
    let sigma = if samples.len() > 1 { (m2 * n / (n - 1.0)).sqrt() } else { 0.0 };
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    (mean, sigma, skew)
}

/// Fringe period of a whole scan, from a fit of its first few periods.
pub fn estimate_period(scan: &FringeScan) -> Result<f64> {
    let n = scan.len();
    if n < 12 {
        return Err(Error::InsufficientData(format!("scan has {n} points")));
    }
    let fit = fit_sinusoid(&scan.phases, &scan.counts, &FitOptions::default())?;
    Ok(fit.period)
}

/// Index ranges of windows `window_periods * period` long, displaced by a
/// quarter period.
fn windows(phases: &[f64], period: f64, window_periods: f64) -> Vec<std::ops::Range<usize>> {
    let width = window_periods * period;
    let step = WINDOW_STEP_PERIODS * period;
    let (first, last) = (phases[0], phases[phases.len() - 1]);
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let start = first + step * k as f64;
        let end = start + width;
        if end > last + 0.5 * median_gap(phases) {
            break;
        }
        let lo = phases.partition_point(|&p| p < start - 1e-12 * width);
        let hi = phases.partition_point(|&p| p < end - 1e-12 * width);
        if hi > lo {
            out.push(lo..hi);
        }
        k += 1;
    }
    out
}

fn median_gap(phases: &[f64]) -> f64 {
    if phases.len() < 2 {
        return 0.0;
    }
    let mut d: Vec<f64> = phases.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Sequentially displaced fits over `window_periods`-period windows.
/// Windows whose fit fails or whose reduced chi-square exceeds
/// [`DISCARD_REDUCED_CHI2`] are discarded.
pub fn sliding_fidelity_distribution(scan: &FringeScan, window_periods: f64) -> Result<FidelityEstimate> {
    if !(window_periods >= 1.5) {
        return Err(Error::arg("windows must span at least 1.5 periods"));
    }
    let period = estimate_period(scan)?;
    let ranges = windows(&scan.phases, period, window_periods);
    let opts = FitOptions {
        period_hint: Some(period),
        ..FitOptions::default()
    };
    let fits: Vec<Option<f64>> = ranges
        .par_iter()
        .map(|r| {
            fit_sinusoid(&scan.phases[r.clone()], &scan.counts[r.clone()], &opts)
                .ok()
                .filter(|f| f.reduced_chi2 <= DISCARD_REDUCED_CHI2)
                .map(|f| 0.5 * (1.0 + f.visibility()))
        })
        .collect();
    let samples: Vec<f64> = fits.iter().flatten().copied().collect();
    if samples.len() < MIN_WINDOWS {
        return Err(Error::InsufficientData(format!(
            "{} accepted windows of {}, need {MIN_WINDOWS}",
            samples.len(),
            ranges.len()
        )));
    }
    let (mean, sigma, skewness) = moments(&samples);
    Ok(FidelityEstimate {
        mean,
        sigma,
        skewness,
        windows_total: ranges.len(),
        windows_discarded: ranges.len() - samples.len(),
        period,
        gaussian: GaussianOverlay { mean, sigma },
        samples,
    })
}

/// [`sliding_fidelity_distribution`] on each regime segment separately.
pub fn sliding_fidelity_by_regime(scan: &FringeScan, window_periods: f64) -> Vec<(u8, Result<FidelityEstimate>)> {
    scan.regime_segments()
        .into_iter()
        .map(|(flag, range)| (flag, sliding_fidelity_distribution(&scan.slice(range), window_periods)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_center: f64,
    pub density: f64,
    pub gaussian: f64,
}

/// Normalized histogram of `samples` with the overlay density at each bin
/// center.
pub fn histogram(samples: &[f64], bins: usize, overlay: &GaussianOverlay) -> Result<Vec<HistogramBin>> {
    if samples.is_empty() || bins == 0 {
        return Err(Error::InsufficientData("empty histogram".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo > 0.0 { (lo, hi) } else { (lo - 0.005, hi + 0.005) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let k = (((s - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = samples.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let center = lo + width * (k as f64 + 0.5);
            HistogramBin {
                bin_center: center,
                density: c as f64 / (n * width),
                gaussian: overlay.pdf(center),
            }
        })
        .collect())
}
