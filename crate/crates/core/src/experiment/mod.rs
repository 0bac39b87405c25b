//! Monte Carlo model of the fringe and HOM measurements.

pub mod budget;
mod config;
mod hom;
mod model;

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{sliding_fidelity_by_regime, subtract_recorded_accidentals, FidelityEstimate};
use crate::error::Result;
use crate::scan::{FringeScan, ScanMetadata, NOISE_OFF, NOISE_ON};

pub use budget::{imperfection_budget, BudgetRow, ImperfectionBudget};
pub use config::{
    CampaignRates, DetectorConfig, ExperimentConfig, RateTable, RegimePlan, ScanGrid, SourceModel, SCHEMA_VERSION,
};
pub use hom::{
    calibrate_overlap, double_pair_penalty, hom_coincidence_probability, hom_scan, hom_visibility_model,
    single_pair_coincidence, HomScan, MIN_STABLE_COUNTS,
};
pub use model::{
    dephased_fidelity, distinguishable_purification, noisy_pair, pair_model, purified_model, sigma_for_fidelity,
    AnalyzedState, FringeModel, PurifiedModelParams,
};

/// Measured pair fidelities with the noise generators on and off, and the
/// HOM visibility, used by [`ExperimentConfig::lab`].
pub const LAB_QUIET_FIDELITY: [f64; 2] = [0.978, 0.977];
pub const LAB_NOISY_FIDELITY: [f64; 2] = [0.751, 0.750];
pub const LAB_HOM_VISIBILITY: f64 = 0.99;
/// Fidelity lost to interferometer phase drift in the purified campaign.
pub const LAB_DRIFT_REDUCTION: f64 = 0.008;

/// `sqrt(2 ln 2)`: the noise width that halves a coherence, taking a
/// perfect pair to fidelity 3/4.
pub fn half_coherence_sigma() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Phase jitter that lowers fidelity `f` by `reduction`.
pub fn phase_drift_for_reduction(f: f64, reduction: f64) -> Result<f64> {
    sigma_for_fidelity(f, f - reduction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    Pair1,
    Pair2,
    Purified,
}

impl StateSource {
    pub const ALL: [StateSource; 3] = [StateSource::Pair1, StateSource::Pair2, StateSource::Purified];

    pub fn label(self) -> &'static str {
        match self {
            StateSource::Pair1 => "pair1",
            StateSource::Pair2 => "pair2",
            StateSource::Purified => "purified",
        }
    }

    fn scan_id(self) -> ScanId {
        match self {
            StateSource::Pair1 => ScanId::Pair1,
            StateSource::Pair2 => ScanId::Pair2,
            StateSource::Purified => ScanId::Purified,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum ScanId {
    Pair1 = 1,
    Pair2 = 2,
    Purified = 3,
    Hom = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG stream of one scan point; the seed picks the key.
pub(crate) fn point_stream(scan: ScanId, index: usize) -> u64 {
    splitmix64(((scan as u64) << 32) ^ index as u64)
}

pub(crate) fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(mean.round())
    } else {
        0.0
    }
}

impl ExperimentConfig {
    /// Perfect pairs with both noise generators at `sigma`, ideal optics and
    /// detectors, no accidentals, 10^4 expected counts per point, noise-on
    /// regime only.
    pub fn ideal_noise(sigma: f64) -> Self {
        let mut cfg = Self {
            noise_sigma_1: sigma,
            noise_sigma_2: sigma,
            target_mean_counts: Some(1.0e4),
            ..Self::default()
        };
        cfg.scan.regimes = RegimePlan::NoiseOnly;
        for r in [&mut cfg.rates.pair1, &mut cfg.rates.pair2, &mut cfg.rates.purified] {
            r.singles_analyzer_hz = 0.0;
        }
        cfg
    }

    /// The laboratory operating point: quiet pairs at 97.8 % and 97.7 %,
    /// noise set to bring them to 75.1 % and 75.0 %, the overlap calibrated
    /// to the 99 % HOM dip, double pairs, the free-running herald detector,
    /// phase drift in the purified interferometer and the nominal 85/15
    /// couplers.
    pub fn lab() -> Result<Self> {
        let mut cfg = Self::default();
        let [q1, q2] = LAB_QUIET_FIDELITY;
        let [n1, n2] = LAB_NOISY_FIDELITY;
        cfg.pair_fidelity = LAB_QUIET_FIDELITY;
        cfg.noise_sigma_1 = sigma_for_fidelity(q1, n1)?;
        cfg.noise_sigma_2 = sigma_for_fidelity(q2, n2)?;
        cfg.source.internal_overlap = calibrate_overlap(cfg.source.emission_prob, LAB_HOM_VISIBILITY)?;
        cfg.partial_distinguishability = true;
        cfg.double_pairs = true;
        let det = DetectorConfig::free_running_herald(cfg.window());
        cfg.detectors.insert("d_a".into(), det);
        cfg.detectors.insert("d_b".into(), det);
        let ideal = crate::protocol::purified_fidelity(n1, n2);
        cfg.phase_drift_sigma = phase_drift_for_reduction(ideal, LAB_DRIFT_REDUCTION)?;
        cfg.coupler_transmittance = crate::protocol::NOMINAL_TRANSMITTANCE;
        cfg.dwell_s = 20.0;
        Ok(cfg)
    }

    fn regime_flags(&self) -> Vec<u8> {
        match self.scan.regimes {
            RegimePlan::NoiseOffThenOn => vec![NOISE_OFF, NOISE_ON],
            RegimePlan::NoiseOnly => vec![NOISE_ON],
            RegimePlan::QuietOnly => vec![NOISE_OFF],
        }
    }

    fn campaign_rates(&self, source: StateSource) -> CampaignRates {
        match source {
            StateSource::Pair1 => self.rates.pair1,
            StateSource::Pair2 => self.rates.pair2,
            StateSource::Purified => self.rates.purified,
        }
    }

    /// Parameters of the purified-state model in the given regime.
    pub fn purified_params(&self, regime: u8) -> Result<PurifiedModelParams> {
        let on = regime == NOISE_ON;
        Ok(PurifiedModelParams {
            pair_fidelity: self.pair_fidelity,
            sigma: if on { [self.noise_sigma_1, self.noise_sigma_2] } else { [0.0, 0.0] },
            transmittance: self.coupler_transmittance,
            herald_mode: self.herald_mode,
            d_a: self.herald_detector("d_a")?,
            d_b: self.herald_detector("d_b")?,
            overlap: self.overlap(),
            double_pair_prob: self.double_pairs.then_some(self.source.emission_prob),
            phase_drift_sigma: self.phase_drift_sigma,
        })
    }
}

/// Expected fringe of `source` in `regime`.
pub fn fringe_model(source: StateSource, cfg: &ExperimentConfig, regime: u8) -> Result<FringeModel> {
    let on = regime == NOISE_ON;
    match source {
        StateSource::Pair1 => pair_model(cfg.pair_fidelity[0], if on { cfg.noise_sigma_1 } else { 0.0 }),
        StateSource::Pair2 => pair_model(cfg.pair_fidelity[1], if on { cfg.noise_sigma_2 } else { 0.0 }),
        StateSource::Purified => purified_model(&cfg.purified_params(regime)?),
    }
}

/// Integration time per scan point for a campaign.
pub fn exposure_s(cfg: &ExperimentConfig, source: StateSource) -> f64 {
    match cfg.target_mean_counts {
        Some(target) => target / cfg.campaign_rates(source).signal_rate_hz,
        None => cfg.dwell_s * cfg.shots_per_point as f64,
    }
}

/// Expected signal and accidental counts at each point of the scan grid,
/// with the regime flags.
pub fn expected_counts(source: StateSource, cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<u8>)> {
    cfg.validate()?;
    let rates = cfg.campaign_rates(source);
    let exposure = exposure_s(cfg, source);
    let accidental = rates.accidental_rate(cfg.window()) * exposure;
    let per_regime = cfg.scan.points_per_regime();
    let step = TAU / cfg.scan.points_per_period as f64;
    let (mut phases, mut signal, mut acc, mut flags) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (r, flag) in cfg.regime_flags().into_iter().enumerate() {
        let model = fringe_model(source, cfg, flag)?;
        let scale = rates.signal_rate_hz * exposure / model.mean();
        for k in 0..per_regime {
            let phi = cfg.scan.start_phase + step * (r * per_regime + k) as f64;
            phases.push(phi);
            signal.push(scale * model.click_probability(phi));
            acc.push(accidental);
            flags.push(flag);
        }
    }
    Ok((phases, signal, acc, flags))
}

/// Poisson-sampled coincidence counts of one campaign, accidentals
/// included. The noise-on regime (if any) follows the noise-off one on a
/// continuing phase ramp.
pub fn fringe_scan(source: StateSource, cfg: &ExperimentConfig) -> Result<FringeScan> {
    let (phases, signal, acc, flags) = expected_counts(source, cfg)?;
    let id = source.scan_id();
    let counts: Vec<f64> = signal
        .par_iter()
        .zip(acc.par_iter())
        .enumerate()
        .map(|(i, (&mu, &a))| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(point_stream(id, i));
            poisson(&mut rng, mu) + poisson(&mut rng, a)
        })
        .collect();
    let transition_index = flags.iter().position(|&f| f == NOISE_ON).filter(|&i| i > 0);
    let rate = cfg.campaign_rates(source).accidental_rate(cfg.window());
    FringeScan::with_columns(
        phases,
        counts,
        acc,
        flags,
        ScanMetadata {
            label: source.label().into(),
            exposure_s: exposure_s(cfg, source),
            accidental_rate_hz: rate,
            accidentals_subtracted: false,
            seed: Some(cfg.seed),
            transition_index,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub regime: u8,
    /// Fidelity of the expected fringe.
    pub model_fidelity: f64,
    pub estimate: FidelityEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub source: StateSource,
    /// Raw counts as recorded.
    pub scan: FringeScan,
    pub regimes: Vec<RegimeSummary>,
}

impl CampaignResult {
    pub fn regime(&self, flag: u8) -> Option<&RegimeSummary> {
        self.regimes.iter().find(|r| r.regime == flag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDataset {
    pub seed: u64,
    pub campaigns: Vec<CampaignResult>,
}

impl ExperimentDataset {
    pub fn campaign(&self, source: StateSource) -> &CampaignResult {
        self.campaigns
            .iter()
            .find(|c| c.source == source)
            .expect("every source is recorded")
    }

    /// Mean fitted fidelity of a campaign in a regime.
    pub fn mean_fidelity(&self, source: StateSource, regime: u8) -> Option<f64> {
        self.campaign(source).regime(regime).map(|r| r.estimate.mean)
    }
}

/// Fidelity distributions of one recorded campaign, per regime, after
/// optional accidental subtraction.
pub fn analyze_campaign(source: StateSource, scan: FringeScan, cfg: &ExperimentConfig) -> Result<CampaignResult> {
    let analyzed = if cfg.subtract_accidentals {
        subtract_recorded_accidentals(&scan)
    } else {
        scan.clone()
    };
    let mut regimes = Vec::new();
    for (flag, estimate) in sliding_fidelity_by_regime(&analyzed, cfg.window_periods) {
        regimes.push(RegimeSummary {
            regime: flag,
            model_fidelity: fringe_model(source, cfg, flag)?.fidelity(),
            estimate: estimate?,
        });
    }
    Ok(CampaignResult { source, scan, regimes })
}

/// Records and analyzes the three campaigns.
pub fn full_experiment(cfg: &ExperimentConfig) -> Result<ExperimentDataset> {
    let campaigns = StateSource::ALL
        .iter()
        .map(|&s| analyze_campaign(s, fringe_scan(s, cfg)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentDataset { seed: cfg.seed, campaigns })
}
