//! Photon detectors, heralding and coincidence statistics.
//!
//! Detectors are diagonal in the Fock basis. A detector may watch several
//! modes at once (for example the two internal labels of one spatial mode);
//! it then responds to the total photon number on those modes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{partial_trace_matrix, DensityOperator};
use crate::scalar::Real;

/// Coincidence window of the counting electronics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceWindow {
    tau_s: f64,
}

impl CoincidenceWindow {
    pub fn new(tau_s: f64) -> Result<Self> {
        if !(tau_s > 0.0) {
            return Err(Error::arg("coincidence window must be positive"));
        }
        Ok(Self { tau_s })
    }

    pub fn seconds(&self) -> f64 {
        self.tau_s
    }
}

impl Default for CoincidenceWindow {
    /// 800 ps, the FWHM of the coincidence peak.
    fn default() -> Self {
        Self { tau_s: 800e-12 }
    }
}

/// Converts a dark-count rate into a click probability per window, to first
/// order in `rate * window`.
pub fn dark_prob_from_rate(rate_hz: f64, window_s: f64) -> f64 {
    (rate_hz * window_s).clamp(0.0, 1.0)
}

/// Gate width assumed for the gated InGaAs detector. Not a measured value;
/// exposed so configs can override it.
pub const DEFAULT_GATE_WIDTH_S: f64 = 2.5e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel<T: Real> {
    efficiency: T,
    dark_prob: T,
    number_resolving: bool,
    /// Metadata only.
    pub dead_time_s: Option<f64>,
    /// Metadata only.
    pub gate_rate_hz: Option<f64>,
}

impl<T: Real> DetectorModel<T> {
    pub fn new(efficiency: T, dark_prob: T, number_resolving: bool) -> Result<Self> {
        for (v, name) in [(efficiency, "efficiency"), (dark_prob, "dark probability")] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::arg(format!(
                    "detector {name} {} outside [0, 1]",
                    v.to_f64_lossy()
                )));
            }
        }
        Ok(Self {
            efficiency,
            dark_prob,
            number_resolving,
            dead_time_s: None,
            gate_rate_hz: None,
        })
    }

    /// Unit-efficiency, noiseless photon-number-resolving detector.
    pub fn ideal() -> Self {
        Self {
            efficiency: T::one(),
            dark_prob: T::zero(),
            number_resolving: true,
            dead_time_s: None,
            gate_rate_hz: None,
        }
    }

    /// Unit-efficiency, noiseless click/no-click detector.
    pub fn ideal_threshold() -> Self {
        Self {
            number_resolving: false,
            ..Self::ideal()
        }
    }

    /// Free-running InGaAs/InP heralding detector: 8 % efficiency,
    /// 1300 dark counts per second, 30 us dead time.
    pub fn free_running_herald(window: CoincidenceWindow) -> Self {
        Self {
            efficiency: T::of(0.08),
            dark_prob: T::of(dark_prob_from_rate(1300.0, window.seconds())),
            number_resolving: false,
            dead_time_s: Some(30e-6),
            gate_rate_hz: None,
        }
    }

    /// Gated InGaAs analyzer detector: 5.5 % efficiency, 2.7e-5 dark counts
    /// per ns of gate, 10 us dead time, triggered at up to 15.5 kHz.
    pub fn gated_analyzer(gate_width_s: f64) -> Self {
        Self {
            efficiency: T::of(0.055),
            dark_prob: T::of(dark_prob_from_rate(2.7e-5 * 1e9, gate_width_s)),
            number_resolving: false,
            dead_time_s: Some(10e-6),
            gate_rate_hz: Some(15.5e3),
        }
    }

    pub fn efficiency(&self) -> T {
        self.efficiency
    }

    pub fn dark_prob(&self) -> T {
        self.dark_prob
    }

    pub fn number_resolving(&self) -> bool {
        self.number_resolving
    }

    /// Probability of no click given `n` photons.
    pub fn no_click_probability(&self, n: usize) -> T {
        (T::one() - self.dark_prob) * (T::one() - self.efficiency).powi(n as i32)
    }

    pub fn click_probability(&self, n: usize) -> T {
        T::one() - self.no_click_probability(n)
    }

    /// Probability of registering exactly `k` counts given `n` photons:
    /// binomial thinning by the efficiency, plus at most one dark count.
    pub fn count_probability(&self, k: usize, n: usize) -> T {
        let thinned = |k: usize| -> T {
            if k > n {
                return T::zero();
            }
            let coef = (0..k).fold(1.0, |a, t| a * (n - t) as f64 / (t + 1) as f64);
            T::of(coef) * self.efficiency.powi(k as i32) * (T::one() - self.efficiency).powi((n - k) as i32)
        };
        let dark = self.dark_prob;
        let mut p = (T::one() - dark) * thinned(k);
        if k > 0 {
            p += dark * thinned(k - 1);
        }
        p
    }

    /// POVM weight of `outcome` given `n` photons on the watched modes.
    pub fn outcome_weight(&self, outcome: Outcome, n: usize) -> Result<T> {
        match outcome {
            Outcome::Click => Ok(self.click_probability(n)),
            Outcome::NoClick => Ok(self.no_click_probability(n)),
            Outcome::Exactly(k) => {
                if !self.number_resolving {
                    return Err(Error::arg(
                        "exactly-n outcome requested from a threshold detector",
                    ));
                }
                Ok(self.count_probability(k, n))
            }
        }
    }
}

/// Diagonals of the click and no-click POVM elements for photon numbers
/// `0..=max_photons`.
pub fn click_povm<T: Real>(detector: &DetectorModel<T>, max_photons: usize) -> (Vec<T>, Vec<T>) {
    let no_click: Vec<T> = (0..=max_photons)
        .map(|n| detector.no_click_probability(n))
        .collect();
    let click = no_click.iter().map(|&e| T::one() - e).collect();
    (click, no_click)
}

/// Number-resolved POVM family: entry `k` holds the diagonal of the element
/// for `k` counts, for `k` in `0..=max_photons + 1` (a dark count can add one).
pub fn number_povm<T: Real>(detector: &DetectorModel<T>, max_photons: usize) -> Vec<Vec<T>> {
    (0..=max_photons + 1)
        .map(|k| {
            (0..=max_photons)
                .map(|n| detector.count_probability(k, n))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Click,
    NoClick,
    /// Exactly `n` counts; only for number-resolving detectors.
    Exactly(usize),
}

/// A detector watching one or more modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPort<T: Real> {
    pub modes: Vec<usize>,
    pub detector: DetectorModel<T>,
}

impl<T: Real> DetectorPort<T> {
    pub fn new(modes: Vec<usize>, detector: DetectorModel<T>) -> Self {
        Self { modes, detector }
    }

    pub fn single(mode: usize, detector: DetectorModel<T>) -> Self {
        Self {
            modes: vec![mode],
            detector,
        }
    }
}

/// One detector outcome within a [`ClickPattern`].
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<T: Real> {
    pub port: DetectorPort<T>,
    pub outcome: Outcome,
}

impl<T: Real> Measurement<T> {
    pub fn new(modes: Vec<usize>, detector: DetectorModel<T>, outcome: Outcome) -> Self {
        Self {
            port: DetectorPort::new(modes, detector),
            outcome,
        }
    }

    pub fn single(mode: usize, detector: DetectorModel<T>, outcome: Outcome) -> Self {
        Self::new(vec![mode], detector, outcome)
    }
}

pub type ClickPattern<T> = [Measurement<T>];

fn port_photons(rho: &DensityOperator<impl Real>, index: usize, modes: &[usize]) -> usize {
    modes.iter().map(|&m| rho.basis().photons_in(index, m)).sum()
}

/// Validates the pattern and returns the per-basis-vector POVM weight and
/// the sorted list of measured modes.
fn pattern_weights<T: Real>(rho: &DensityOperator<T>, pattern: &ClickPattern<T>) -> Result<(Vec<T>, Vec<usize>)> {
    let basis = rho.basis();
    let mut used = vec![false; basis.n_modes()];
    for m in pattern {
        if m.port.modes.is_empty() {
            return Err(Error::arg("detector port watches no modes"));
        }
        if matches!(m.outcome, Outcome::Exactly(_)) && !m.port.detector.number_resolving() {
            return Err(Error::arg(
                "exactly-n outcome requested from a threshold detector",
            ));
        }
        for &mode in &m.port.modes {
            basis.check_mode(mode)?;
            if used[mode] {
                return Err(Error::arg(format!("mode {mode} measured twice")));
            }
            used[mode] = true;
        }
    }
    let mut weights = vec![T::one(); basis.dimension()];
    for (i, w) in weights.iter_mut().enumerate() {
        for m in pattern {
            *w *= m.port.detector.outcome_weight(m.outcome, port_photons(rho, i, &m.port.modes))?;
        }
    }
    let measured = (0..basis.n_modes()).filter(|&k| used[k]).collect();
    Ok((weights, measured))
}

/// Probability of observing `pattern`.
pub fn outcome_probability<T: Real>(rho: &DensityOperator<T>, pattern: &ClickPattern<T>) -> Result<T> {
    let (w, _) = pattern_weights(rho, pattern)?;
    Ok((0..rho.dim()).fold(T::zero(), |s, i| s + w[i] * rho.matrix()[(i, i)].re))
}

/// Conditions `rho` on `pattern`, traces out the measured modes and returns
/// the normalized state of the remaining modes (in ascending order) with the
/// outcome probability.
pub fn condition_on_pattern<T: Real>(
    rho: &DensityOperator<T>,
    pattern: &ClickPattern<T>,
) -> Result<(DensityOperator<T>, T)> {
    let (weighted, prob, remaining) = condition_unnormalized(rho, pattern)?;
    if !(prob > T::of(T::DEGENERATE_PROB)) {
        return Err(Error::DegenerateOutcome(format!(
            "detector pattern has probability {:e}",
            prob.to_f64_lossy()
        )));
    }
    let basis = rho.basis().sub_basis(remaining.len())?;
    let inv = T::one() / prob;
    Ok((
        DensityOperator::new_unchecked(basis, weighted.map(|z| z * inv)),
        prob,
    ))
}

/// Unnormalized conditional operator on the unmeasured modes, its trace and
/// the list of unmeasured modes.
pub(crate) fn condition_unnormalized<T: Real>(
    rho: &DensityOperator<T>,
    pattern: &ClickPattern<T>,
) -> Result<(DMatrix<nalgebra::Complex<T>>, T, Vec<usize>)> {
    let (w, measured) = pattern_weights(rho, pattern)?;
    let remaining: Vec<usize> = (0..rho.basis().n_modes())
        .filter(|k| !measured.contains(k))
        .collect();
    if remaining.is_empty() {
        return Err(Error::arg(
            "pattern measures every mode; use outcome_probability",
        ));
    }
    // Diagonal POVM: rows and columns that survive the partial trace share
    // their measured-mode occupation, hence the same weight.
    let d = rho.dim();
    let m = rho.matrix();
    let weighted_full = DMatrix::from_fn(d, d, |i, j| m[(i, j)] * w[i]);
    let reduced = partial_trace_matrix(rho.basis(), &weighted_full, &remaining)?;
    let prob = (0..reduced.nrows()).fold(T::zero(), |s, i| s + reduced[(i, i)].re);
    Ok((reduced, prob, remaining))
}

/// Probability that both ports click in the same window.
pub fn coincidence_probability<T: Real>(
    rho: &DensityOperator<T>,
    first: &DetectorPort<T>,
    second: &DetectorPort<T>,
) -> Result<T> {
    let pattern = [
        Measurement {
            port: first.clone(),
            outcome: Outcome::Click,
        },
        Measurement {
            port: second.clone(),
            outcome: Outcome::Click,
        },
    ];
    outcome_probability(rho, &pattern)
}

/// Click probability of a single port.
pub fn click_probability<T: Real>(rho: &DensityOperator<T>, port: &DetectorPort<T>) -> Result<T> {
    outcome_probability(
        rho,
        &[Measurement {
            port: port.clone(),
            outcome: Outcome::Click,
        }],
    )
}

/// First-order accidental coincidence rate `s1 * s2 * tau`.
pub fn accidental_rate(singles_1_hz: f64, singles_2_hz: f64, window: CoincidenceWindow) -> f64 {
    singles_1_hz * singles_2_hz * window.seconds()
}
