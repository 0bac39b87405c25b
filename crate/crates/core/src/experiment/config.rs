use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detection::{dark_prob_from_rate, CoincidenceWindow, DetectorModel};
use crate::error::{Error, Result};
use crate::protocol::{HeraldMode, BALANCED_TRANSMITTANCE};

pub const SCHEMA_VERSION: u32 = 1;

/// Pair source. `emission_prob` is per coincidence window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceModel {
    pub emission_prob: f64,
    /// Overlap of the internal (spectral, temporal, polarization) states of
    /// the two photons of a pair.
    pub internal_overlap: f64,
    /// Metadata.
    pub pair_rate_hz: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            emission_prob: 1.0e-3,
            internal_overlap: 0.995,
            pair_rate_hz: 1.3e6,
        }
    }
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        unit(self.emission_prob, "source.emission_prob")?;
        unit(self.internal_overlap, "source.internal_overlap")?;
        if !(self.pair_rate_hz >= 0.0) {
            return Err(cfg_err("source.pair_rate_hz must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_prob_per_window: f64,
    pub number_resolving: bool,
}

impl DetectorConfig {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_prob_per_window: 0.0,
            number_resolving: true,
        }
    }

    /// The free-running heralding detector (8 %, 1300 dark counts per second
    /// over the coincidence window).
    pub fn free_running_herald(window: CoincidenceWindow) -> Self {
        Self {
            efficiency: 0.08,
            dark_prob_per_window: dark_prob_from_rate(1300.0, window.seconds()),
            number_resolving: false,
        }
    }

    pub fn model(&self) -> Result<DetectorModel<f64>> {
        DetectorModel::new(self.efficiency, self.dark_prob_per_window, self.number_resolving)
            .map_err(|e| cfg_err(e.to_string()))
    }
}

/// Count rates of one fringe campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignRates {
    /// True coincidences per second averaged over the fringe.
    pub signal_rate_hz: f64,
    pub singles_herald_hz: f64,
    pub singles_analyzer_hz: f64,
}

impl CampaignRates {
    pub fn accidental_rate(&self, window: CoincidenceWindow) -> f64 {
        crate::detection::accidental_rate(self.singles_herald_hz, self.singles_analyzer_hz, window)
    }
}

/// Rates of the three campaigns. The defaults give 26.6, 27.2 and 32.3
/// accidentals per minute and signal rates at which leaving them in lowers
/// the fitted fidelities by about as much as observed (75.1 to 73.9, 75.0
/// to 73.7, 79.6 to 77.8).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateTable {
    pub pair1: CampaignRates,
    pub pair2: CampaignRates,
    pub purified: CampaignRates,
}

impl Default for RateTable {
    fn default() -> Self {
        let tau = CoincidenceWindow::default().seconds();
        let gate = 15.5e3;
        let analyzer = |per_minute: f64| per_minute / 60.0 / (gate * tau);
        Self {
            pair1: CampaignRates {
                signal_rate_hz: 8.9,
                singles_herald_hz: gate,
                singles_analyzer_hz: analyzer(26.6),
            },
            pair2: CampaignRates {
                signal_rate_hz: 8.3,
                singles_herald_hz: gate,
                singles_analyzer_hz: analyzer(27.2),
            },
            purified: CampaignRates {
                signal_rate_hz: 8.3,
                singles_herald_hz: gate,
                singles_analyzer_hz: analyzer(32.3),
            },
        }
    }
}

/// Which regimes a campaign records, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimePlan {
    NoiseOffThenOn,
    NoiseOnly,
    QuietOnly,
}

/// Linear piezo ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanGrid {
    pub points_per_period: usize,
    pub periods_per_regime: f64,
    pub regimes: RegimePlan,
    /// Phase of the first point, radians.
    pub start_phase: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            points_per_period: 24,
            periods_per_regime: 34.0,
            regimes: RegimePlan::NoiseOffThenOn,
            start_phase: 0.0,
        }
    }
}

impl ScanGrid {
    pub fn points_per_regime(&self) -> usize {
        (self.points_per_period as f64 * self.periods_per_regime).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub source: SourceModel,
    /// Fidelities of the two pairs with the noise generators off.
    pub pair_fidelity: [f64; 2],
    pub noise_sigma_1: f64,
    pub noise_sigma_2: f64,
    /// Residual phase jitter of the purified-state interferometer, radians.
    pub phase_drift_sigma: f64,
    /// Alice's coupler; Bob's is the mirror.
    pub coupler_transmittance: f64,
    pub herald_mode: HeraldMode,
    /// Herald detectors, keyed `d_a` and `d_b`; missing keys are ideal.
    pub detectors: BTreeMap<String, DetectorConfig>,
    /// Model the overlap `source.internal_overlap`; otherwise photons are
    /// perfectly indistinguishable.
    pub partial_distinguishability: bool,
    /// Add the double-pair admixture to the purified campaign.
    pub double_pairs: bool,
    pub scan: ScanGrid,
    pub rates: RateTable,
    pub dwell_s: f64,
    /// Overrides the dwell so the mean signal per point is this many counts.
    pub target_mean_counts: Option<f64>,
    pub shots_per_point: u32,
    pub subtract_accidentals: bool,
    pub coincidence_window_s: f64,
    pub window_periods: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            source: SourceModel::default(),
            pair_fidelity: [1.0, 1.0],
            noise_sigma_1: 0.0,
            noise_sigma_2: 0.0,
            phase_drift_sigma: 0.0,
            coupler_transmittance: BALANCED_TRANSMITTANCE,
            herald_mode: HeraldMode::Either,
            detectors: BTreeMap::new(),
            partial_distinguishability: false,
            double_pairs: false,
            scan: ScanGrid::default(),
            rates: RateTable::default(),
            dwell_s: 1.0,
            target_mean_counts: None,
            shots_per_point: 1,
            subtract_accidentals: true,
            coincidence_window_s: CoincidenceWindow::default().seconds(),
            window_periods: 2.0,
            seed: 42,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Configuration(msg.into())
}

fn unit(x: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(cfg_err(format!("{name} = {x} outside [0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.source.validate()?;
        unit(self.pair_fidelity[0], "pair_fidelity[0]")?;
        unit(self.pair_fidelity[1], "pair_fidelity[1]")?;
        unit(self.coupler_transmittance, "coupler_transmittance")?;
        for (name, v) in [
            ("noise_sigma_1", self.noise_sigma_1),
            ("noise_sigma_2", self.noise_sigma_2),
            ("phase_drift_sigma", self.phase_drift_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(cfg_err(format!("{name} must be finite and nonnegative")));
            }
        }
        for (key, d) in &self.detectors {
            if key != "d_a" && key != "d_b" {
                return Err(cfg_err(format!("unknown detector '{key}' (expected d_a or d_b)")));
            }
            d.model()?;
        }
        if self.scan.points_per_period < 8 {
            return Err(cfg_err("scan.points_per_period must be at least 8"));
        }
        if !(self.scan.periods_per_regime >= 3.0) {
            return Err(cfg_err("scan.periods_per_regime must be at least 3"));
        }
        if self.shots_per_point < 1 {
            return Err(cfg_err("shots_per_point must be at least 1"));
        }
        if !(self.dwell_s > 0.0) {
            return Err(cfg_err("dwell_s must be positive"));
        }
        if let Some(t) = self.target_mean_counts {
            if !(t > 0.0 && t.is_finite()) {
                return Err(cfg_err("target_mean_counts must be positive"));
            }
        }
        for r in [self.rates.pair1, self.rates.pair2, self.rates.purified] {
            if !(r.signal_rate_hz > 0.0 && r.singles_herald_hz >= 0.0 && r.singles_analyzer_hz >= 0.0) {
                return Err(cfg_err("campaign rates must be nonnegative with a positive signal rate"));
            }
        }
        CoincidenceWindow::new(self.coincidence_window_s).map_err(|e| cfg_err(e.to_string()))?;
        if !(self.window_periods >= 1.5) {
            return Err(cfg_err("window_periods must be at least 1.5"));
        }
        Ok(())
    }

    pub fn window(&self) -> CoincidenceWindow {
        CoincidenceWindow::new(self.coincidence_window_s).unwrap_or_default()
    }

    pub fn herald_detector(&self, key: &str) -> Result<DetectorModel<f64>> {
        self.detectors
            .get(key)
            .copied()
            .unwrap_or_else(DetectorConfig::ideal)
            .model()
    }

    pub fn overlap(&self) -> f64 {
        if self.partial_distinguishability {
            self.source.internal_overlap
        } else {
            1.0
        }
    }
}
