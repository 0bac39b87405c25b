//! The purification scheme: pair construction, closed-form fidelity and
//! success probability, the brute-force circuit oracle, transmittance sweeps
//! and repeater error bookkeeping.
//!
//! Register layout for the circuit simulation: modes `(a1, b1, a2, b2)` are
//! `(0, 1, 2, 3)`. Alice mixes `a1` and `a2` on a beam splitter whose outputs
//! are `a~` (mode 0) and the herald `d_a` (mode 2); Bob does the same on
//! `b1`, `b2` giving `b~` (mode 1) and `d_b` (mode 3).

use std::f64::consts::PI;

use nalgebra::Complex;
use rayon::prelude::*;

use crate::detection::{condition_on_pattern, DetectorModel, Measurement, Outcome};
use crate::error::{Error, Result};
use crate::fock::{make_basis, tensor, DensityOperator, FockBasis, PureState};
use crate::optics::{apply_circuit, phase_shift, OpticalCircuit};
use crate::scalar::{abs, c, Real};

/// Transmittance at which the heralded amplitudes of `a~` and `b~` are
/// balanced, `cos^2(pi/8)`. This is the value the nominal 85/15 couplers
/// stand for; only here does the circuit reproduce the closed form exactly.
pub const BALANCED_TRANSMITTANCE: f64 = 0.853_553_390_593_273_8;

/// Intensity transmission quoted for the couplers of the experiment.
pub const NOMINAL_TRANSMITTANCE: f64 = 0.85;

/// Phase put on `b2` before Bob's coupler. With the symmetric beam-splitter
/// convention and a mirrored Bob coupler, the two heralded paths into `b~`
/// would otherwise interfere destructively.
pub const BOB_INPUT_PHASE: f64 = PI;

/// Photon cutoff of the simulation register. Two photons per mode is enough
/// for two pairs with at most one photon per mode each.
const REGISTER_CUTOFF: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntangledPairSpec<T: Real> {
    pub fidelity: T,
    /// Weight of `|0,0>`.
    pub vacuum_weight: T,
    /// Weight of `|1,1>` (incoherent double emission).
    pub double_photon_weight: T,
}

impl<T: Real> EntangledPairSpec<T> {
    pub fn new(fidelity: T) -> Self {
        Self {
            fidelity,
            vacuum_weight: T::zero(),
            double_photon_weight: T::zero(),
        }
    }

    pub fn with_vacuum(mut self, weight: T) -> Self {
        self.vacuum_weight = weight;
        self
    }

    pub fn with_double_photons(mut self, weight: T) -> Self {
        self.double_photon_weight = weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.fidelity) || !unit(self.vacuum_weight) || !unit(self.double_photon_weight) {
            return Err(Error::arg("pair fidelity and weights must lie in [0, 1]"));
        }
        if self.vacuum_weight + self.double_photon_weight > T::one() + T::of(T::STATE_TOL) {
            return Err(Error::arg("vacuum and double-photon weights exceed 1"));
        }
        Ok(())
    }
}

/// `(|1,0> + sign |0,1>) / sqrt 2` on modes `(a, b)` of `basis`.
fn bell<T: Real>(basis: &FockBasis, (a, b): (usize, usize), sign: T) -> Result<PureState<T>> {
    let mut occ_a = vec![0; basis.n_modes()];
    let mut occ_b = occ_a.clone();
    occ_a[a] = 1;
    occ_b[b] = 1;
    PureState::from_terms(basis, &[(c(T::one()), &occ_a), (c(sign), &occ_b)])
}

pub fn psi_plus<T: Real>(basis: &FockBasis, modes: (usize, usize)) -> Result<PureState<T>> {
    bell(basis, modes, T::one())
}

pub fn psi_minus<T: Real>(basis: &FockBasis, modes: (usize, usize)) -> Result<PureState<T>> {
    bell(basis, modes, -T::one())
}

/// `F |psi+><psi+| + (1-F) |psi-><psi-|` on modes `(a, b)`, mixed with the
/// optional vacuum and double-photon terms. Other modes are left empty.
pub fn make_entangled_pair<T: Real>(
    spec: &EntangledPairSpec<T>,
    basis: &FockBasis,
    modes: (usize, usize),
) -> Result<DensityOperator<T>> {
    spec.validate()?;
    basis.check_mode(modes.0)?;
    basis.check_mode(modes.1)?;
    if modes.0 == modes.1 {
        return Err(Error::arg("pair modes must differ"));
    }
    let single = T::one() - spec.vacuum_weight - spec.double_photon_weight;
    let plus = psi_plus(basis, modes)?.projector();
    let minus = psi_minus(basis, modes)?.projector();
    let vacuum = DensityOperator::vacuum(basis);
    let mut occ = vec![0; basis.n_modes()];
    occ[modes.0] = 1;
    occ[modes.1] = 1;
    let double = PureState::basis_state(basis, &occ)?.projector();
    DensityOperator::mixture(&[
        (single * spec.fidelity, &plus),
        (single * (T::one() - spec.fidelity), &minus),
        (spec.vacuum_weight, &vacuum),
        (spec.double_photon_weight, &double),
    ])
}

fn check_fidelity<T: Real>(f: T) -> Result<()> {
    if f >= T::zero() && f <= T::one() {
        Ok(())
    } else {
        Err(Error::arg(format!("fidelity {} outside [0, 1]", f.to_f64_lossy())))
    }
}

/// Closed-form fidelity after one purification round:
/// `(F1 F2 + F1/2 + F2/2) / (1 + F1 F2 + (1-F1)(1-F2))`.
pub fn purified_fidelity<T: Real>(f1: T, f2: T) -> T {
    let half = T::of(0.5);
    let num = f1 * f2 + half * f1 + half * f2;
    let den = T::one() + f1 * f2 + (T::one() - f1) * (T::one() - f2);
    num / den
}

/// Probability that one round succeeds, `(1 + F1 F2 + (1-F1)(1-F2)) / 4`.
pub fn success_probability<T: Real>(f1: T, f2: T) -> T {
    T::of(0.25) * (T::one() + f1 * f2 + (T::one() - f1) * (T::one() - f2))
}

/// Absolute fidelity gain `F~(F1, F2) - F1`.
pub fn improvement<T: Real>(f1: T, f2: T) -> T {
    purified_fidelity(f1, f2) - f1
}

/// Input fidelity in `[0.5, 1]` maximizing `F~(F, F) - F`, with the gain.
/// Golden-section search; the gain is unimodal on this interval.
pub fn max_improvement() -> (f64, f64) {
    let gain = |f: f64| improvement(f, f);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.5f64, 1.0f64);
    while hi - lo > 1e-12 {
        let x1 = hi - ratio * (hi - lo);
        let x2 = lo + ratio * (hi - lo);
        if gain(x1) < gain(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let f = 0.5 * (lo + hi);
    (f, gain(f))
}

/// Which heralding events are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldMode {
    /// One photon at `d_a`, none at `d_b`.
    DA,
    /// One photon at `d_b`, none at `d_a`.
    DB,
    /// Either of the two single-click events.
    #[default]
    Either,
}

impl HeraldMode {
    pub fn outcomes(self) -> &'static [Herald] {
        match self {
            HeraldMode::DA => &[Herald::DA],
            HeraldMode::DB => &[Herald::DB],
            HeraldMode::Either => &[Herald::DA, Herald::DB],
        }
    }
}

/// A single heralding event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Herald {
    DA,
    DB,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurificationSetup<T: Real> {
    pub t_alice: T,
    pub t_bob: T,
    pub herald_mode: HeraldMode,
}

impl<T: Real> Default for PurificationSetup<T> {
    /// Balanced couplers (`cos^2(pi/8)` at Alice, the mirror at Bob),
    /// accepting either herald.
    fn default() -> Self {
        Self::mirrored(T::of(BALANCED_TRANSMITTANCE))
    }
}

impl<T: Real> PurificationSetup<T> {
    /// Alice at `t`, Bob at `1 - t`.
    pub fn mirrored(t: T) -> Self {
        Self {
            t_alice: t,
            t_bob: T::one() - t,
            herald_mode: HeraldMode::Either,
        }
    }

    /// The couplers exactly as quoted, 85/15.
    pub fn nominal() -> Self {
        Self::mirrored(T::of(NOMINAL_TRANSMITTANCE))
    }

    pub fn with_herald(mut self, herald_mode: HeraldMode) -> Self {
        self.herald_mode = herald_mode;
        self
    }

    /// The interferometer acting on the four-mode register.
    pub fn circuit(&self) -> Result<OpticalCircuit<T>> {
        OpticalCircuit::new()
            .phase(T::of(BOB_INPUT_PHASE), 3)
            .beam_splitter(self.t_alice, 0, 2)?
            .beam_splitter(self.t_bob, 1, 3)
    }
}

/// Detectors at `d_a` and `d_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldDetectors<T: Real> {
    pub d_a: DetectorModel<T>,
    pub d_b: DetectorModel<T>,
}

impl<T: Real> HeraldDetectors<T> {
    /// Ideal photon-number-resolving detectors (the oracle setting).
    pub fn ideal() -> Self {
        Self {
            d_a: DetectorModel::ideal(),
            d_b: DetectorModel::ideal(),
        }
    }

    pub fn threshold(detector: DetectorModel<T>) -> Self {
        Self {
            d_a: detector,
            d_b: detector,
        }
    }

    fn pattern(&self, herald: Herald) -> Vec<Measurement<T>> {
        self.grouped_pattern(herald, &[2], &[3])
    }

    /// Herald pattern with `d_a` and `d_b` each watching a group of modes.
    pub(crate) fn grouped_pattern(&self, herald: Herald, d_a: &[usize], d_b: &[usize]) -> Vec<Measurement<T>> {
        let (fire, silent) = match herald {
            Herald::DA => ((d_a, self.d_a), (d_b, self.d_b)),
            Herald::DB => ((d_b, self.d_b), (d_a, self.d_a)),
        };
        let outcome = |d: &DetectorModel<T>, n: usize| {
            if d.number_resolving() {
                Outcome::Exactly(n)
            } else if n == 0 {
                Outcome::NoClick
            } else {
                Outcome::Click
            }
        };
        vec![
            Measurement::new(fire.0.to_vec(), fire.1, outcome(&fire.1, 1)),
            Measurement::new(silent.0.to_vec(), silent.1, outcome(&silent.1, 0)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurificationOutcome<T: Real> {
    pub purified_fidelity: T,
    pub success_probability: T,
}

/// Heralded output state on `(a~, b~)` with its probability.
#[derive(Debug, Clone)]
pub struct HeraldedState<T: Real> {
    pub state: DensityOperator<T>,
    pub probability: T,
}

impl<T: Real> HeraldedState<T> {
    /// Overlap with `psi+` renormalized to the one-photon sector of the
    /// output modes.
    pub fn single_photon_fidelity(&self) -> Result<T> {
        single_photon_fidelity(&self.state)
    }
}

/// `<psi+| rho |psi+>` divided by the weight of the one-photon sector of a
/// two-mode state.
pub fn single_photon_fidelity<T: Real>(rho: &DensityOperator<T>) -> Result<T> {
    let b = rho.basis();
    if b.n_modes() != 2 {
        return Err(Error::arg("single-photon fidelity needs a two-mode state"));
    }
    let i10 = b.index_of(&[1, 0])?;
    let i01 = b.index_of(&[0, 1])?;
    let m = rho.matrix();
    let sector = m[(i10, i10)].re + m[(i01, i01)].re;
    if !(sector > T::of(T::DEGENERATE_PROB)) {
        return Err(Error::DegenerateOutcome(
            "heralded state has no one-photon component".into(),
        ));
    }
    let overlap = T::of(0.5) * (sector + m[(i10, i01)].re + m[(i01, i10)].re);
    Ok(crate::fock::clamp01(overlap / sector))
}

fn register_basis() -> Result<FockBasis> {
    make_basis(4, REGISTER_CUTOFF)
}

/// Four-mode input `rho_1 (a1, b1) (x) rho_2 (a2, b2)` in register order.
pub fn input_register<T: Real>(rho1: &DensityOperator<T>, rho2: &DensityOperator<T>) -> Result<DensityOperator<T>> {
    if rho1.basis().n_modes() != 2 || rho2.basis().n_modes() != 2 {
        return Err(Error::arg("input pairs must be two-mode states"));
    }
    let joint = tensor(rho1, rho2)?; // (a1, b1, a2, b2)
    if joint.basis().cutoff() < REGISTER_CUTOFF {
        return Err(Error::arg(format!(
            "input pairs need a cutoff of at least {REGISTER_CUTOFF}"
        )));
    }
    Ok(joint)
}

/// Phase on `b~` that makes the `|1,0><0,1|` coherence of the heralded
/// state real and positive for perfect inputs. Zero when that coherence
/// vanishes (unbalanced enough couplers leave nothing to correct).
pub fn herald_phase_correction<T: Real>(setup: &PurificationSetup<T>, herald: Herald) -> Result<T> {
    let basis = register_basis()?;
    let pair = make_entangled_pair(&EntangledPairSpec::new(T::one()), &make_basis(2, REGISTER_CUTOFF)?, (0, 1))?;
    let register = input_register(&pair, &pair)?;
    debug_assert_eq!(register.basis(), &basis);
    let out = apply_circuit(&register, &setup.circuit()?)?;
    let (post, _) = condition_on_pattern(&out, &HeraldDetectors::ideal().pattern(herald))?;
    let b = post.basis();
    let coh = post.matrix()[(b.index_of(&[1, 0])?, b.index_of(&[0, 1])?)];
    if (coh.re * coh.re + coh.im * coh.im).sqrt() <= T::of(T::STATE_TOL) {
        return Ok(T::zero());
    }
    Ok(coh.im.atan2(coh.re))
}

/// Runs the purification circuit on arbitrary two-mode inputs and returns
/// the phase-corrected heralded state on `(a~, b~)`.
pub fn purify_states<T: Real>(
    rho1: &DensityOperator<T>,
    rho2: &DensityOperator<T>,
    setup: &PurificationSetup<T>,
    detectors: &HeraldDetectors<T>,
) -> Result<HeraldedState<T>> {
    let register = input_register(rho1, rho2)?;
    let out = apply_circuit(&register, &setup.circuit()?)?;
    let mut total: Option<nalgebra::DMatrix<Complex<T>>> = None;
    let mut probability = T::zero();
    let mut basis = None;
    for &herald in setup.herald_mode.outcomes() {
        let (post, p) = match condition_on_pattern(&out, &detectors.pattern(herald)) {
            Ok(r) => r,
            Err(Error::DegenerateOutcome(_)) => continue,
            Err(e) => return Err(e),
        };
        let theta = herald_phase_correction(setup, herald)?;
        let corrected = phase_shift(&post, 1, theta)?;
        let weighted = corrected.matrix().map(|z| z * p);
        total = Some(match total {
            Some(acc) => acc + weighted,
            None => weighted,
        });
        probability += p;
        basis = Some(corrected.basis().clone());
    }
    let (Some(total), Some(basis)) = (total, basis) else {
        return Err(Error::DegenerateOutcome("heralding probability is zero".into()));
    };
    let inv = T::one() / probability;
    let state = DensityOperator::new_unchecked(basis, total.map(|z| z * inv));
    Ok(HeraldedState { state, probability })
}

/// Brute-force realization of the scheme with ideal number-resolving
/// herald detectors.
pub fn simulate_purification<T: Real>(
    spec1: &EntangledPairSpec<T>,
    spec2: &EntangledPairSpec<T>,
    setup: &PurificationSetup<T>,
) -> Result<PurificationOutcome<T>> {
    simulate_purification_with(spec1, spec2, setup, &HeraldDetectors::ideal())
}

/// As [`simulate_purification`], with the given herald detectors. Threshold
/// detectors accept a click at the firing detector and silence at the other.
pub fn simulate_purification_with<T: Real>(
    spec1: &EntangledPairSpec<T>,
    spec2: &EntangledPairSpec<T>,
    setup: &PurificationSetup<T>,
    detectors: &HeraldDetectors<T>,
) -> Result<PurificationOutcome<T>> {
    let pair_basis = make_basis(2, REGISTER_CUTOFF)?;
    let rho1 = make_entangled_pair(spec1, &pair_basis, (0, 1))?;
    let rho2 = make_entangled_pair(spec2, &pair_basis, (0, 1))?;
    let heralded = purify_states(&rho1, &rho2, setup, detectors)?;
    Ok(PurificationOutcome {
        purified_fidelity: heralded.single_photon_fidelity()?,
        success_probability: heralded.probability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<T: Real> {
    pub transmittance: T,
    pub purified_fidelity: T,
    pub success_probability: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T: Real> {
    pub rows: Vec<SweepRow<T>>,
    /// Index into `rows` of the largest purified fidelity (first on ties).
    pub argmax: usize,
}

impl<T: Real> SweepResult<T> {
    pub fn best(&self) -> &SweepRow<T> {
        &self.rows[self.argmax]
    }
}

/// Simulates the scheme at Alice transmittance `t` and Bob `1 - t` for each
/// grid point. Grid points where nothing is heralded into the one-photon
/// sector are reported with fidelity 0.5 (no coherence survives) only if the
/// herald itself has nonzero probability; otherwise the error propagates.
pub fn sweep_transmittance<T: Real + Send + Sync>(
    f1: T,
    f2: T,
    grid: &[T],
    herald_mode: HeraldMode,
) -> Result<SweepResult<T>> {
    check_fidelity(f1)?;
    check_fidelity(f2)?;
    if grid.is_empty() {
        return Err(Error::arg("empty transmittance grid"));
    }
    let (s1, s2) = (EntangledPairSpec::new(f1), EntangledPairSpec::new(f2));
    let rows = grid
        .par_iter()
        .map(|&t| {
            let setup = PurificationSetup::mirrored(t).with_herald(herald_mode);
            let out = simulate_purification(&s1, &s2, &setup)?;
            Ok(SweepRow {
                transmittance: t,
                purified_fidelity: out.purified_fidelity,
                success_probability: out.success_probability,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmax = rows
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| {
            if r.purified_fidelity > rows[best].purified_fidelity {
                i
            } else {
                best
            }
        });
    Ok(SweepResult { rows, argmax })
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
pub fn linear_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * T::of(k as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Repeated purification of two equally purified copies. Entry `k` is
/// `(F_k, p_k)` where `F_0 = F` and `p_k` is the success probability of the
/// round that consumes two copies of `F_k`.
pub fn iterate_purification<T: Real>(f: T, rounds: usize) -> Result<Vec<(T, T)>> {
    if !(f >= T::of(0.5) && f <= T::one()) {
        return Err(Error::arg("iterated purification needs F in [0.5, 1]"));
    }
    let mut out = Vec::with_capacity(rounds + 1);
    let mut fk = f;
    for _ in 0..=rounds {
        out.push((fk, success_probability(fk, fk)));
        fk = purified_fidelity(fk, fk);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeaterScenario<T: Real> {
    pub initial_error: T,
    pub swap_levels: usize,
    /// Whether to purify after each level; missing entries mean no.
    pub purify_after_level: Vec<bool>,
}

impl<T: Real> RepeaterScenario<T> {
    pub fn unpurified(initial_error: T, swap_levels: usize) -> Self {
        Self {
            initial_error,
            swap_levels,
            purify_after_level: Vec::new(),
        }
    }

    pub fn purify_every_level(initial_error: T, swap_levels: usize) -> Self {
        Self {
            initial_error,
            swap_levels,
            purify_after_level: vec![true; swap_levels],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeaterTrajectory<T: Real> {
    /// Error at level 0 followed by the error after each completed level.
    pub epsilon: Vec<T>,
    /// Error right after the swap of each completed level, before any
    /// purification.
    pub after_swap: Vec<T>,
    /// The error reached 1/2 and the trajectory was cut there.
    pub saturated: bool,
}

/// Error per level: each swap doubles the phase-error probability, an
/// optional purification then maps `eps` to `1 - F~(1-eps, 1-eps)`.
pub fn repeater_trajectory<T: Real>(scenario: &RepeaterScenario<T>) -> Result<RepeaterTrajectory<T>> {
    let half = T::of(0.5);
    let eps0 = scenario.initial_error;
    if !(eps0 >= T::zero() && eps0 <= half) {
        return Err(Error::arg("initial error must lie in [0, 0.5]"));
    }
    let mut epsilon = vec![eps0];
    let mut after_swap = Vec::new();
    let mut saturated = false;
    let mut eps = eps0;
    for level in 0..scenario.swap_levels {
        eps = eps + eps;
        if eps > half {
            saturated = true;
            after_swap.push(half);
            epsilon.push(half);
            break;
        }
        after_swap.push(eps);
        if scenario.purify_after_level.get(level).copied().unwrap_or(false) {
            let f = T::one() - eps;
            eps = T::one() - purified_fidelity(f, f);
        }
        epsilon.push(eps);
    }
    Ok(RepeaterTrajectory {
        epsilon,
        after_swap,
        saturated,
    })
}

/// Largest deviation of the simulated fidelity from the closed form over a
/// square grid, at the given setup. Used to quantify the coupler systematic.
pub fn max_oracle_deviation<T: Real>(setup: &PurificationSetup<T>, grid: &[T]) -> Result<T> {
    let mut worst = T::zero();
    for &f1 in grid {
        for &f2 in grid {
            let out = simulate_purification(&EntangledPairSpec::new(f1), &EntangledPairSpec::new(f2), setup)?;
            let d = abs(out.purified_fidelity - purified_fidelity(f1, f2));
            if d > worst {
                worst = d;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::overlap_fidelity;

    fn spec(f: f64) -> EntangledPairSpec<f64> {
        EntangledPairSpec::new(f)
    }

    #[test]
    fn balanced_transmittance_constant() {
        let t = (PI / 8.0).cos().powi(2);
        assert!((t - BALANCED_TRANSMITTANCE).abs() < 1e-15);
        assert!(((2.0 * t - 1.0) - 2.0 * (t * (1.0 - t)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pair_examples() {
        let b = make_basis(2, 1).unwrap();
        let pure = make_entangled_pair(&spec(1.0), &b, (0, 1)).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-14);
        let mixed = make_entangled_pair(&spec(0.5), &b, (0, 1)).unwrap();
        assert!(mixed.matrix()[(1, 2)].norm() < 1e-16);
        assert!((mixed.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        let rho = make_entangled_pair(&spec(0.75), &b, (0, 1)).unwrap();
        let mut ev = rho.eigenvalues();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((ev[0] - 0.75).abs() < 1e-12 && (ev[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pair_with_vacuum_and_doubles() {
        let b = make_basis(3, 2).unwrap();
        let s = spec(0.8).with_vacuum(0.1).with_double_photons(0.05);
        let rho = make_entangled_pair(&s, &b, (2, 0)).unwrap();
        rho.check_invariants().unwrap();
        let f = overlap_fidelity(&rho, &psi_plus(&b, (2, 0)).unwrap()).unwrap();
        assert!((f - 0.85 * 0.8).abs() < 1e-12);
        assert!(make_entangled_pair(&spec(0.8).with_vacuum(0.7).with_double_photons(0.4), &b, (0, 1)).is_err());
        assert!(make_entangled_pair(&spec(1.2), &b, (0, 1)).is_err());
        assert!(make_entangled_pair(&spec(0.9), &b, (1, 1)).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(purified_fidelity(1.0, 1.0), 1.0);
        assert_eq!(purified_fidelity(0.5, 0.5), 0.5);
        assert!((purified_fidelity(0.751f64, 0.750) - 0.8082).abs() < 1e-4);
        assert!((purified_fidelity(0.98f64, 0.98) - 0.9896).abs() < 1e-4);
        assert_eq!(success_probability(1.0, 1.0), 0.5);
        assert_eq!(success_probability(0.5, 0.5), 0.375);
        assert_eq!(success_probability(0.75, 0.75), 0.40625);
        assert_eq!(purified_fidelity(0.6, 0.9), purified_fidelity(0.9, 0.6));
    }

    #[test]
    fn improvement_readings() {
        assert!((improvement(0.751f64, 0.750) - 0.0572).abs() < 1e-4);
        assert!((improvement(0.76f64, 0.76) - 0.0580).abs() < 1e-4);
        let (f, gain) = max_improvement();
        assert!(gain >= improvement(0.76, 0.76));
        assert!(f > 0.76 && f < 0.78, "{f}");
    }

    #[test]
    fn perfect_inputs_balanced() {
        let out = simulate_purification(&spec(1.0), &spec(1.0), &PurificationSetup::default()).unwrap();
        assert!((out.purified_fidelity - 1.0).abs() < 1e-10);
        assert!((out.success_probability - 0.5).abs() < 1e-10);
    }

    #[test]
    fn mixed_inputs_match_closed_form() {
        for herald in [HeraldMode::DA, HeraldMode::DB, HeraldMode::Either] {
            let setup = PurificationSetup::default().with_herald(herald);
            for (f1, f2) in [(0.75, 0.75), (0.6, 0.9), (0.5, 1.0), (0.93, 0.55)] {
                let out = simulate_purification(&spec(f1), &spec(f2), &setup).unwrap();
                let p = success_probability(f1, f2);
                let expected_p = if herald == HeraldMode::Either { p } else { p / 2.0 };
                assert!((out.purified_fidelity - purified_fidelity(f1, f2)).abs() < 1e-10);
                assert!((out.success_probability - expected_p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn literal_couplers_deviate() {
        let out = simulate_purification(&spec(0.75), &spec(0.75), &PurificationSetup::nominal()).unwrap();
        let d = (out.purified_fidelity - purified_fidelity(0.75, 0.75)).abs();
        assert!(d > 1e-4 && d < 5e-3, "{d}");
    }

    #[test]
    fn correction_phases_at_balance() {
        let setup = PurificationSetup::<f64>::default();
        let a = herald_phase_correction(&setup, Herald::DA).unwrap();
        let b = herald_phase_correction(&setup, Herald::DB).unwrap();
        // The two outcomes differ by pi on b~.
        let diff = (a - b).rem_euclid(2.0 * PI);
        assert!((diff - PI).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn vacuum_does_not_change_fidelity() {
        let setup = PurificationSetup::default();
        let reference = simulate_purification(&spec(0.75), &spec(0.8), &setup).unwrap();
        for w in [0.2, 0.5] {
            let out = simulate_purification(&spec(0.75).with_vacuum(w), &spec(0.8), &setup).unwrap();
            assert!((out.purified_fidelity - reference.purified_fidelity).abs() < 1e-10);
        }
    }

    #[test]
    fn swapping_roles_is_a_symmetry() {
        // Exchanging Alice and Bob maps T to 1 - T and d_a to d_b; the pair
        // labels can be exchanged as well.
        for t in [0.7, 0.8, NOMINAL_TRANSMITTANCE, 0.9] {
            let run = |a: f64, b: f64, t: f64, h| {
                simulate_purification(&spec(a), &spec(b), &PurificationSetup::mirrored(t).with_herald(h)).unwrap()
            };
            let base = run(0.7, 0.9, t, HeraldMode::DA);
            for other in [
                run(0.7, 0.9, 1.0 - t, HeraldMode::DB),
                run(0.9, 0.7, 1.0 - t, HeraldMode::DA),
                run(0.9, 0.7, t, HeraldMode::DB),
            ] {
                assert!((other.purified_fidelity - base.purified_fidelity).abs() < 1e-10);
                assert!((other.success_probability - base.success_probability).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn threshold_detectors_at_unit_efficiency_agree() {
        let setup = PurificationSetup::default();
        let ideal = simulate_purification(&spec(0.7), &spec(0.9), &setup).unwrap();
        let thr = simulate_purification_with(&spec(0.7), &spec(0.9), &setup, &HeraldDetectors::threshold(DetectorModel::ideal_threshold())).unwrap();
        // Without double photons no detector sees two photons.
        assert!((thr.purified_fidelity - ideal.purified_fidelity).abs() < 1e-12);
        let noisy = HeraldDetectors::threshold(DetectorModel::new(0.5, 1e-3, false).unwrap());
        let out = simulate_purification_with(&spec(0.7), &spec(0.9), &setup, &noisy).unwrap();
        assert!(out.purified_fidelity < ideal.purified_fidelity);
    }

    #[test]
    fn sweep_examples() {
        let grid = [0.5, 0.85];
        let s = sweep_transmittance(0.75, 0.75, &grid, HeraldMode::Either).unwrap();
        assert!(s.rows[1].purified_fidelity >= s.rows[0].purified_fidelity);
        assert_eq!(s.argmax, 1);
        let fine = sweep_transmittance(0.76, 0.76, &linear_grid(0.01, 0.99, 99), HeraldMode::Either).unwrap();
        assert_eq!(fine.rows.len(), 99);
        assert!(fine.best().purified_fidelity >= purified_fidelity(0.76, 0.76));
    }

    #[test]
    fn iteration_examples() {
        assert!(iterate_purification(1.0, 4).unwrap().iter().all(|&(f, _)| f == 1.0));
        assert!(iterate_purification(0.5, 4).unwrap().iter().all(|&(f, _)| f == 0.5));
        let seq = iterate_purification(0.75, 3).unwrap();
        assert_eq!(seq.len(), 4);
        for w in seq.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
        assert!(iterate_purification(0.4, 1).is_err());
    }

    #[test]
    fn repeater_examples() {
        let t = repeater_trajectory(&RepeaterScenario::unpurified(0.05, 2)).unwrap();
        assert_eq!(t.epsilon, vec![0.05, 0.1, 0.2]);
        assert!(!t.saturated);
        let z = repeater_trajectory(&RepeaterScenario::purify_every_level(0.0, 3)).unwrap();
        assert!(z.epsilon.iter().all(|&e| e == 0.0));
        let p = repeater_trajectory(&RepeaterScenario::purify_every_level(0.05, 2)).unwrap();
        assert_eq!(p.epsilon[1], 1.0 - purified_fidelity(0.9, 0.9));
        let s = repeater_trajectory(&RepeaterScenario::unpurified(0.2, 3)).unwrap();
        assert!(s.saturated);
        assert_eq!(s.epsilon, vec![0.2, 0.4, 0.5]);
    }
}
