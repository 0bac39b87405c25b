//! Least-squares fit of `C + A cos(2 pi x / P + phi)` to counting data.
//!
//! The model is linear in `(C, a, b)` for `C + a cos(w x) + b sin(w x)`, so
//! the frequency is first located by a periodogram (a linear solve per trial
//! frequency) and then all four parameters are refined by damped
//! Gauss-Newton with Poisson weights.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Radians, in `(-pi, pi]`.
    pub phase: f64,
    pub period: f64,
    pub rms_residual: f64,
    /// Chi-square per degree of freedom with Poisson variances.
    pub reduced_chi2: f64,
    pub iterations: usize,
    /// The amplitude hit the `A <= C` bound and was clamped.
    pub clamped: bool,
}

impl SinusoidFit {
    pub fn visibility(&self) -> f64 {
        if self.offset > 0.0 {
            (self.amplitude / self.offset).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (TAU * x / self.period + self.phase).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Expected period; narrows the frequency search to `[0.6, 1.6]` times it.
    pub period_hint: Option<f64>,
    pub min_points: usize,
    pub min_periods: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            period_hint: None,
            min_points: 12,
            min_periods: 1.5,
            max_iterations: 200,
        }
    }
}

/// Poisson variance floor so that zero-count points keep finite weight.
fn variance(model: f64) -> f64 {
    model.max(1.0)
}

/// Weighted linear fit of `(C, a, b)` at angular frequency `w` about `x0`.
/// Returns the parameters and the weighted residual sum.
fn linear_fit(x: &[f64], y: &[f64], wts: &[f64], w: f64, x0: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for i in 0..x.len() {
        let t = w * (x[i] - x0);
        let row = Vector3::new(1.0, t.cos(), t.sin());
        ata += row * row.transpose() * wts[i];
        aty += row * (y[i] * wts[i]);
    }
    let sol = ata.cholesky()?.solve(&aty);
    let mut rss = 0.0;
    for i in 0..x.len() {
        let t = w * (x[i] - x0);
        let r = y[i] - sol[0] - sol[1] * t.cos() - sol[2] * t.sin();
        rss += wts[i] * r * r;
    }
    Some((sol, rss))
}

/// Frequency with the smallest linear-fit residual on a uniform grid over
/// `[w_lo, w_hi]`, refined by one parabolic step.
pub(crate) fn periodogram_peak(x: &[f64], y: &[f64], w_lo: f64, w_hi: f64, steps: usize) -> Option<f64> {
    let x0 = 0.5 * (x[0] + x[x.len() - 1]);
    let wts: Vec<f64> = y.iter().map(|&v| 1.0 / variance(v)).collect();
    let dw = (w_hi - w_lo) / steps as f64;
    let rss: Vec<f64> = (0..=steps)
        .map(|k| {
            linear_fit(x, y, &wts, w_lo + dw * k as f64, x0)
                .map(|(_, r)| r)
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let (k, _) = rss
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let mut w = w_lo + dw * k as f64;
    if k > 0 && k < steps {
        let (l, m, r) = (rss[k - 1], rss[k], rss[k + 1]);
        let denom = l - 2.0 * m + r;
        if denom > 0.0 {
            w += 0.5 * dw * (l - r) / denom;
        }
    }
    Some(w)
}

fn median_spacing(x: &[f64]) -> f64 {
    let mut d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

fn centered_model(p: &Vector4<f64>, x0: f64, xi: f64) -> f64 {
    let t = p[3] * (xi - x0);
    p[0] + p[1] * t.cos() + p[2] * t.sin()
}

/// Damped Gauss-Newton on `(C, a, b, w)` of `C + a cos(w u) + b sin(w u)`,
/// `u = x - x0`.
fn levenberg_marquardt(
    x: &[f64],
    y: &[f64],
    wts: &[f64],
    x0: f64,
    mut p: Vector4<f64>,
    max_iterations: usize,
) -> Result<(Vector4<f64>, usize)> {
    let n = x.len();
    let model = |p: &Vector4<f64>, xi: f64| centered_model(p, x0, xi);
    let chi2 = |p: &Vector4<f64>| {
        x.iter()
            .zip(y)
            .zip(wts)
            .map(|((&xi, &yi), &wi)| {
                let r = yi - model(p, xi);
                wi * r * r
            })
            .sum::<f64>()
    };

    let mut cost = chi2(&p);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for i in 0..n {
            let u = x[i] - x0;
            let t = p[3] * u;
            let (s, c) = t.sin_cos();
            let j = Vector4::new(1.0, c, s, u * (p[2] * c - p[1] * s));
            let r = y[i] - model(&p, x[i]);
            jtj += j * j.transpose() * wts[i];
            jtr += j * (r * wts[i]);
        }
        let scale = jtj.diagonal().max().max(1e-300);
        let mut stepped = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += mu * jtj[(k, k)].max(1e-12 * scale);
            }
            let Some(delta) = damped.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let trial = p + delta;
            let trial_cost = chi2(&trial);
            if trial_cost <= cost {
                let small = (0..4).all(|k| delta[k].abs() <= 1e-10 * (p[k].abs() + 1e-10));
                let flat = cost - trial_cost <= 1e-15 * cost.max(1e-300);
                p = trial;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                stepped = true;
                if small || flat {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !stepped {
            // No descent direction left: the current point is a minimum to
            // working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure(format!(
            "no convergence after {iterations} iterations"
        )));
    }

    Ok((p, iterations))
}

/// Fits `C + A cos(2 pi x / period + phase)` to `(x, y)`.
///
/// `x` must be strictly increasing. Fails with [`Error::InsufficientData`]
/// for too few points and with [`Error::FitFailure`] when the iteration does
/// not converge or the fitted period is too long for the segment.
pub fn fit_sinusoid(x: &[f64], y: &[f64], opts: &FitOptions) -> Result<SinusoidFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::arg("fit abscissa and ordinate differ in length"));
    }
    if n < opts.min_points.max(5) {
        return Err(Error::InsufficientData(format!("{n} points, need {}", opts.min_points)));
    }
    let span = x[n - 1] - x[0];
    let dx = median_spacing(x);
    if !(span > 0.0) || !(dx > 0.0) {
        return Err(Error::arg("fit abscissa must be strictly increasing"));
    }

    let (w_lo, w_hi) = match opts.period_hint {
        Some(p) if p > 0.0 => (TAU / (1.6 * p), TAU / (0.6 * p)),
        _ => (TAU * opts.min_periods.max(1.0) * 0.8 / span, TAU / (4.0 * dx)),
    };
    let steps = (((w_hi - w_lo) * span / TAU) * 8.0).ceil().clamp(64.0, 20_000.0) as usize;
    let w0 = periodogram_peak(x, y, w_lo, w_hi, steps)
        .ok_or_else(|| Error::FitFailure("periodogram is singular".into()))?;

    let x0 = 0.5 * (x[0] + x[n - 1]);
    let wts0: Vec<f64> = y.iter().map(|&v| 1.0 / variance(v)).collect();
    let (lin, _) = linear_fit(x, y, &wts0, w0, x0)
        .ok_or_else(|| Error::FitFailure("initial linear fit is singular".into()))?;
    let p = Vector4::new(lin[0], lin[1], lin[2], w0);

    // Observed-count weights start the fit; one refit with weights from the
    // fitted curve removes their bias toward low points.
    let (p, it0) = levenberg_marquardt(x, y, &wts0, x0, p, opts.max_iterations)?;
    let wts1: Vec<f64> = x.iter().map(|&xi| 1.0 / variance(centered_model(&p, x0, xi))).collect();
    let (p, it1) = levenberg_marquardt(x, y, &wts1, x0, p, opts.max_iterations)?;
    let iterations = it0 + it1;

    let (c0, a, b, w) = (p[0], p[1], p[2], p[3].abs());
    // cos(w u) a + sin(w u) b = A cos(w u + phi') with A cos phi' = a, A sin phi' = -b.
    let b = if p[3] < 0.0 { -b } else { b };
    let mut amplitude = a.hypot(b);
    let phase_centered = (-b).atan2(a);
    if !(c0 > 0.0) {
        return Err(Error::FitFailure(format!("fitted offset {c0} is not positive")));
    }
    let mut clamped = false;
    if amplitude > c0 {
        amplitude = c0;
        clamped = true;
    }
    let period = TAU / w;
    if amplitude > 1e-9 * c0 && span < opts.min_periods * period * (1.0 - 1e-9) {
        return Err(Error::FitFailure(format!(
            "segment spans {:.2} fitted periods, need {}",
            span / period,
            opts.min_periods
        )));
    }
    let phase = wrap_phase(phase_centered - w * x0);

    let fit = SinusoidFit {
        offset: c0,
        amplitude,
        phase,
        period,
        rms_residual: 0.0,
        reduced_chi2: 0.0,
        iterations,
        clamped,
    };
    let (mut ss, mut chi) = (0.0, 0.0);
    for i in 0..n {
        let f = fit.eval(x[i]);
        let r = y[i] - f;
        ss += r * r;
        chi += r * r / variance(f);
    }
    let dof = (n - 4).max(1) as f64;
    Ok(SinusoidFit {
        rms_residual: (ss / n as f64).sqrt(),
        reduced_chi2: chi / dof,
        ..fit
    })
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn grid(n: usize, step: f64) -> Vec<f64> {
        (0..n).map(|i| 0.3 + i as f64 * step).collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        for &(c, a, period, phase) in &[(1000.0, 600.0, TAU, 0.4), (50.0, 12.0, 5.3, -2.9), (2e4, 1.9e4, 7.0, 3.0)] {
            let x = grid(60, 0.27);
            let truth = SinusoidFit {
                offset: c,
                amplitude: a,
                phase,
                period,
                rms_residual: 0.0,
                reduced_chi2: 0.0,
                iterations: 0,
                clamped: false,
            };
            let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
            let fit = fit_sinusoid(&x, &y, &FitOptions::default()).unwrap();
            assert!((fit.offset / c - 1.0).abs() < 1e-6);
            assert!((fit.amplitude / a - 1.0).abs() < 1e-6);
            assert!((fit.period / period - 1.0).abs() < 1e-6);
            assert!(wrap_phase(fit.phase - phase).abs() < 1e-6);
            assert!((fit.visibility() - a / c).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_segment_has_zero_visibility() {
        let x = grid(48, TAU / 24.0);
        let y = vec![200.0; 48];
        let fit = fit_sinusoid(&x, &y, &FitOptions::default()).unwrap();
        assert!(fit.visibility() < 1e-9);
        assert!((fit.offset - 200.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let x = grid(8, 1.0);
        let y = vec![1.0; 8];
        assert!(matches!(fit_sinusoid(&x, &y, &FitOptions::default()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn clamps_overmodulated_fringes() {
        // Counts pinned at zero over half a period look like A > C.
        let x = grid(72, TAU / 24.0);
        let y: Vec<f64> = x.iter().map(|&v| (100.0 * (1.0 + 1.4 * v.cos())).max(0.0)).collect();
        let fit = fit_sinusoid(&x, &y, &FitOptions::default()).unwrap();
        assert!(fit.clamped);
        assert_eq!(fit.visibility(), 1.0);
    }

    #[test]
    fn poisson_visibility_recovery() {
        let x = grid(48, TAU / 24.0);
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x
                .iter()
                .map(|&v| Poisson::new(1e4 * (1.0 + 0.5 * (v + 1.0).cos())).unwrap().sample(&mut rng))
                .collect();
            let fit = fit_sinusoid(&x, &y, &FitOptions::default()).unwrap();
            worst = worst.max((fit.visibility() - 0.5).abs());
        }
        assert!(worst < 0.02, "{worst}");
    }
}
