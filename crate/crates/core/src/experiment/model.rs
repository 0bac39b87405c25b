//! Expected coincidence fringes of the three measured states.

use std::f64::consts::TAU;

use nalgebra::Complex;

use crate::detection::{condition_on_pattern, click_probability, DetectorModel, DetectorPort};
use crate::error::{Error, Result};
use crate::fock::{make_basis, tensor_all, DensityOperator};
use crate::optics::{apply_circuit, gaussian_dephase, phase_shift, OpticalCircuit};
use crate::protocol::{
    herald_phase_correction, make_entangled_pair, purify_states, EntangledPairSpec, HeraldDetectors, HeraldMode,
    PurificationSetup, BOB_INPUT_PHASE,
};

use super::hom::double_pair_penalty;

/// Samples per period used to extract the fringe harmonics. With at most two
/// photons per analyzed arm the click probability is a trigonometric
/// polynomial of degree two, so eight samples resolve it exactly.
const HARMONIC_SAMPLES: usize = 8;

/// A state as seen by the analyzer: each `(a, b)` arm pair is combined on
/// its own 50/50 coupler after the scan phase on `b`, and one detector
/// watches all `a` outputs.
#[derive(Debug, Clone)]
pub struct AnalyzedState {
    pub rho: DensityOperator<f64>,
    pub arms: Vec<(usize, usize)>,
}

impl AnalyzedState {
    pub fn new(rho: DensityOperator<f64>, arms: Vec<(usize, usize)>) -> Self {
        Self { rho, arms }
    }

    /// Click probability of the analyzer detector at scan phase `phi`.
    pub fn click_probability(&self, phi: f64) -> Result<f64> {
        let mut circuit = OpticalCircuit::new();
        for &(a, b) in &self.arms {
            circuit = circuit.phase(phi, b).beam_splitter(0.5, a, b)?;
        }
        let out = apply_circuit(&self.rho, &circuit)?;
        let port = DetectorPort::new(self.arms.iter().map(|&(a, _)| a).collect(), DetectorModel::ideal_threshold());
        click_probability(&out, &port)
    }

    fn dephase_b_arms(&self, sigma: f64) -> Result<Self> {
        let mut rho = self.rho.clone();
        for &(_, b) in &self.arms {
            rho = gaussian_dephase(&rho, b, sigma)?;
        }
        Ok(Self::new(rho, self.arms.clone()))
    }
}

/// Click probability against scan phase, stored as its harmonics
/// `P(phi) = sum_k Re(c_k e^{i k phi})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeModel {
    harmonics: Vec<Complex<f64>>,
}

impl FringeModel {
    /// Probability-weighted mixture of analyzed states plus a fraction
    /// `flat` of events whose clicks do not depend on the phase.
    pub fn from_components(components: &[(f64, AnalyzedState)], flat: f64) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateOutcome("fringe model has no weight".into()));
        }
        let n = HARMONIC_SAMPLES;
        let mut samples = vec![0.0; n];
        for (w, state) in components {
            for (k, s) in samples.iter_mut().enumerate() {
                *s += w / total * state.click_probability(TAU * k as f64 / n as f64)?;
            }
        }
        let mut harmonics: Vec<Complex<f64>> = (0..=n / 2 - 1)
            .map(|k| {
                let c: Complex<f64> = samples
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| s * Complex::from_polar(1.0, -TAU * (k * j) as f64 / n as f64))
                    .sum();
                c * if k == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 }
            })
            .collect();
        for h in harmonics.iter_mut().skip(1) {
            *h *= 1.0 - flat;
        }
        Ok(Self { harmonics })
    }

    pub fn click_probability(&self, phi: f64) -> f64 {
        self.harmonics
            .iter()
            .enumerate()
            .map(|(k, c)| (c * Complex::from_polar(1.0, k as f64 * phi)).re)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.harmonics[0].re
    }

    /// First-harmonic visibility, what a sinusoid fit measures.
    pub fn visibility(&self) -> f64 {
        if self.mean() > 0.0 {
            (self.harmonics[1].norm() / self.mean()).min(1.0)
        } else {
            0.0
        }
    }

    pub fn fidelity(&self) -> f64 {
        0.5 * (1.0 + self.visibility())
    }
}

/// Mixed pair of noise-off fidelity `f0` after Gaussian phase noise of
/// width `sigma` on its `b` mode.
pub fn noisy_pair(f0: f64, sigma: f64, cutoff: usize) -> Result<DensityOperator<f64>> {
    let basis = make_basis(2, cutoff)?;
    let rho = make_entangled_pair(&EntangledPairSpec::new(f0), &basis, (0, 1))?;
    gaussian_dephase(&rho, 1, sigma)
}

/// Fidelity left after Gaussian phase noise of width `sigma` on a pair of
/// fidelity `f0`: the coherence shrinks by `exp(-sigma^2 / 2)`.
pub fn dephased_fidelity(f0: f64, sigma: f64) -> f64 {
    0.5 + (f0 - 0.5) * (-0.5 * sigma * sigma).exp()
}

/// Noise width that takes a pair from `f0` to `target`.
pub fn sigma_for_fidelity(f0: f64, target: f64) -> Result<f64> {
    if !(target > 0.5 && target <= f0 && f0 <= 1.0) {
        return Err(Error::arg(format!(
            "cannot dephase fidelity {f0} to {target}"
        )));
    }
    Ok((-2.0 * ((target - 0.5) / (f0 - 0.5)).ln()).max(0.0).sqrt())
}

pub fn pair_model(f0: f64, sigma: f64) -> Result<FringeModel> {
    let rho = noisy_pair(f0, sigma, 1)?;
    FringeModel::from_components(&[(1.0, AnalyzedState::new(rho, vec![(0, 1)]))], 0.0)
}

/// Parameters of the purified-state model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurifiedModelParams {
    pub pair_fidelity: [f64; 2],
    pub sigma: [f64; 2],
    pub transmittance: f64,
    pub herald_mode: HeraldMode,
    pub d_a: DetectorModel<f64>,
    pub d_b: DetectorModel<f64>,
    /// Internal overlap of the two photons.
    pub overlap: f64,
    /// Emission probability for the double-pair admixture, if modeled.
    pub double_pair_prob: Option<f64>,
    pub phase_drift_sigma: f64,
}

impl PurifiedModelParams {
    pub fn ideal(f1: f64, f2: f64) -> Self {
        Self {
            pair_fidelity: [f1, f2],
            sigma: [0.0, 0.0],
            transmittance: crate::protocol::BALANCED_TRANSMITTANCE,
            herald_mode: HeraldMode::Either,
            d_a: DetectorModel::ideal(),
            d_b: DetectorModel::ideal(),
            overlap: 1.0,
            double_pair_prob: None,
            phase_drift_sigma: 0.0,
        }
    }

    fn setup(&self) -> PurificationSetup<f64> {
        PurificationSetup::mirrored(self.transmittance).with_herald(self.herald_mode)
    }

    fn detectors(&self) -> HeraldDetectors<f64> {
        HeraldDetectors {
            d_a: self.d_a,
            d_b: self.d_b,
        }
    }
}

/// Heralded state when the two photons are fully distinguishable: each
/// carries its own internal label, so the register doubles to eight modes
/// (`a1 b1 a2 b2` with label 0, then with label 1) and never holds more than
/// one photon per mode. Returns the state on `(a~0, b~0, a~1, b~1)` and the
/// herald probability.
pub fn distinguishable_purification(params: &PurifiedModelParams) -> Result<(DensityOperator<f64>, f64)> {
    let rho1 = noisy_pair(params.pair_fidelity[0], params.sigma[0], 1)?;
    let rho2 = noisy_pair(params.pair_fidelity[1], params.sigma[1], 1)?;
    let vac = DensityOperator::vacuum(&make_basis(2, 1)?);
    let register = tensor_all(&[&rho1, &vac, &vac, &rho2])?;
    let setup = params.setup();
    let circuit = OpticalCircuit::new()
        .phase(BOB_INPUT_PHASE, 3)
        .phase(BOB_INPUT_PHASE, 7)
        .beam_splitter(setup.t_alice, 0, 2)?
        .beam_splitter(setup.t_alice, 4, 6)?
        .beam_splitter(setup.t_bob, 1, 3)?
        .beam_splitter(setup.t_bob, 5, 7)?;
    let out = apply_circuit(&register, &circuit)?;
    let detectors = params.detectors();
    let mut total = None;
    let mut prob = 0.0;
    for &herald in setup.herald_mode.outcomes() {
        let pattern = detectors.grouped_pattern(herald, &[2, 6], &[3, 7]);
        let (post, p) = match condition_on_pattern(&out, &pattern) {
            Ok(r) => r,
            Err(Error::DegenerateOutcome(_)) => continue,
            Err(e) => return Err(e),
        };
        let theta = herald_phase_correction(&setup, herald)?;
        let post = phase_shift(&phase_shift(&post, 1, theta)?, 3, theta)?;
        let weighted = post.matrix() * Complex::new(p, 0.0);
        total = Some(match total {
            Some(acc) => acc + weighted,
            None => weighted,
        });
        prob += p;
    }
    let total = total.ok_or_else(|| Error::DegenerateOutcome("nothing heralded".into()))?;
    let basis = make_basis(4, 1)?;
    let rho = DensityOperator::new(basis, total / Complex::new(prob, 0.0))?;
    Ok((rho, prob))
}

/// Fringe of the purified state with the configured imperfections.
pub fn purified_model(params: &PurifiedModelParams) -> Result<FringeModel> {
    let rho1 = noisy_pair(params.pair_fidelity[0], params.sigma[0], 2)?;
    let rho2 = noisy_pair(params.pair_fidelity[1], params.sigma[1], 2)?;
    let heralded = purify_states(&rho1, &rho2, &params.setup(), &params.detectors())?;
    let lam2 = params.overlap * params.overlap;
    let mut components = vec![(lam2 * heralded.probability, AnalyzedState::new(heralded.state, vec![(0, 1)]))];
    if lam2 < 1.0 {
        let (rho, p) = distinguishable_purification(params)?;
        components.push(((1.0 - lam2) * p, AnalyzedState::new(rho, vec![(0, 1), (2, 3)])));
    }
    if params.phase_drift_sigma > 0.0 {
        for (_, c) in components.iter_mut() {
            *c = c.dephase_b_arms(params.phase_drift_sigma)?;
        }
    }
    let flat = params.double_pair_prob.map(double_pair_penalty).unwrap_or(0.0);
    FringeModel::from_components(&components, flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::purified_fidelity;

    #[test]
    fn pair_fringes() {
        assert!((pair_model(1.0, 0.0).unwrap().visibility() - 1.0).abs() < 1e-12);
        let sigma = (2.0 * 2f64.ln()).sqrt();
        let m = pair_model(1.0, sigma).unwrap();
        assert!((m.fidelity() - 0.75).abs() < 1e-12);
        assert!((m.mean() - 0.5).abs() < 1e-12);
        assert!((sigma_for_fidelity(1.0, 0.75).unwrap() - sigma).abs() < 1e-12);
        assert!((dephased_fidelity(0.978, sigma_for_fidelity(0.978, 0.751).unwrap()) - 0.751).abs() < 1e-12);
    }

    #[test]
    fn harmonics_reproduce_direct_evaluation() {
        let rho = noisy_pair(0.9, 0.3, 1).unwrap();
        let state = AnalyzedState::new(rho, vec![(0, 1)]);
        let m = FringeModel::from_components(&[(1.0, state.clone())], 0.0).unwrap();
        for phi in [0.1, 1.7, 4.0] {
            assert!((m.click_probability(phi) - state.click_probability(phi).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_purified_fringe_matches_closed_form() {
        for (f1, f2) in [(0.75, 0.75), (0.751, 0.750), (0.9, 0.6)] {
            let m = purified_model(&PurifiedModelParams::ideal(f1, f2)).unwrap();
            assert!((m.fidelity() - purified_fidelity(f1, f2)).abs() < 1e-10);
        }
    }

    #[test]
    fn distinguishable_photons_still_herald() {
        let params = PurifiedModelParams::ideal(1.0, 1.0);
        let (rho, p) = distinguishable_purification(&params).unwrap();
        rho.check_invariants().unwrap();
        assert!(p > 0.0 && p < 1.0);
        let mut partial = params;
        partial.overlap = 0.9;
        let m = purified_model(&partial).unwrap();
        assert!(m.fidelity() < 1.0 - 1e-6);
    }

    #[test]
    fn flat_admixture_scales_visibility() {
        let mut params = PurifiedModelParams::ideal(0.75, 0.75);
        let base = purified_model(&params).unwrap().visibility();
        params.double_pair_prob = Some(1e-3);
        let v = purified_model(&params).unwrap().visibility();
        assert!((v - base * (1.0 - double_pair_penalty(1e-3))).abs() < 1e-12);
    }
}
