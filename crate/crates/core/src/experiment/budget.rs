//! Fidelity lost to each imperfection of the purified campaign.

use serde::{Deserialize, Serialize};

use crate::detection::DetectorModel;
use crate::error::Result;
use crate::protocol::BALANCED_TRANSMITTANCE;
use crate::scan::NOISE_ON;

use super::config::ExperimentConfig;
use super::model::{purified_model, PurifiedModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub name: String,
    /// Independent estimate of the reduction, for comparison.
    pub reference: f64,
    /// Purified fidelity with only this imperfection on.
    pub fidelity: f64,
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionBudget {
    pub input_fidelity: [f64; 2],
    pub ideal: f64,
    pub rows: Vec<BudgetRow>,
    /// All imperfections on together.
    pub combined: f64,
    pub combined_reduction: f64,
}

/// Noise-on purified fidelity of `cfg`, with each imperfection switched on
/// alone and then all together, against the same inputs with ideal optics.
pub fn imperfection_budget(cfg: &ExperimentConfig) -> Result<ImperfectionBudget> {
    cfg.validate()?;
    let full = cfg.purified_params(NOISE_ON)?;
    let ideal = PurifiedModelParams {
        transmittance: BALANCED_TRANSMITTANCE,
        d_a: DetectorModel::ideal(),
        d_b: DetectorModel::ideal(),
        overlap: 1.0,
        double_pair_prob: None,
        phase_drift_sigma: 0.0,
        ..full
    };
    let f_ideal = purified_model(&ideal)?.fidelity();
    let variants: [(&str, f64, PurifiedModelParams); 5] = [
        ("overlap", 0.0025, PurifiedModelParams { overlap: full.overlap, ..ideal }),
        (
            "double_pairs",
            0.0005,
            PurifiedModelParams {
                double_pair_prob: full.double_pair_prob,
                ..ideal
            },
        ),
        (
            "herald_dark_counts",
            0.0005,
            PurifiedModelParams {
                d_a: full.d_a,
                d_b: full.d_b,
                ..ideal
            },
        ),
        (
            "phase_drift",
            0.008,
            PurifiedModelParams {
                phase_drift_sigma: full.phase_drift_sigma,
                ..ideal
            },
        ),
        (
            "coupler_ratio",
            0.006,
            PurifiedModelParams {
                transmittance: full.transmittance,
                ..ideal
            },
        ),
    ];
    let rows = variants
        .into_iter()
        .map(|(name, reference, params)| {
            let f = purified_model(&params)?.fidelity();
            Ok(BudgetRow {
                name: name.into(),
                reference,
                fidelity: f,
                reduction: f_ideal - f,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let combined = purified_model(&full)?.fidelity();
    Ok(ImperfectionBudget {
        input_fidelity: [
            super::dephased_fidelity(cfg.pair_fidelity[0], cfg.noise_sigma_1),
            super::dephased_fidelity(cfg.pair_fidelity[1], cfg.noise_sigma_2),
        ],
        ideal: f_ideal,
        rows,
        combined,
        combined_reduction: f_ideal - combined,
    })
}
