//! Linear-optical elements and noise channels acting on density operators.
//!
//! Beam splitters use the symmetric convention
//! `[[sqrt(T), i sqrt(1-T)], [i sqrt(1-T), sqrt(T)]]` everywhere: a photon
//! entering mode `i` stays in `i` with amplitude `sqrt(T)` and picks up a
//! factor `i` when it is reflected into `j`. Elements act in place, so after a
//! splitter on `(i, j)` mode `i` holds the output port fed by the transmitted
//! part of input `i`.

use nalgebra::{Complex, DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::fock::{lift_mode_unitary, partial_trace, tensor, DensityOperator, FockBasis};
use crate::scalar::{c, cis, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter<T: Real> {
    transmittance: T,
    modes: (usize, usize),
}

impl<T: Real> BeamSplitter<T> {
    pub fn new(transmittance: T, i: usize, j: usize) -> Result<Self> {
        check_unit_interval(transmittance, "transmittance")?;
        if i == j {
            return Err(Error::arg("beam splitter needs two distinct modes"));
        }
        Ok(Self {
            transmittance,
            modes: (i, j),
        })
    }

    pub fn transmittance(&self) -> T {
        self.transmittance
    }

    pub fn modes(&self) -> (usize, usize) {
        self.modes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShifter<T: Real> {
    pub phase: T,
    pub mode: usize,
}

/// Gaussian-distributed random phase on one mode, averaged analytically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDephaser<T: Real> {
    sigma: T,
    mode: usize,
}

impl<T: Real> GaussianDephaser<T> {
    pub fn new(sigma: T, mode: usize) -> Result<Self> {
        if !(sigma >= T::zero()) {
            return Err(Error::arg("dephasing sigma must be nonnegative"));
        }
        Ok(Self { sigma, mode })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }
}

/// Photon loss with survival probability `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossChannel<T: Real> {
    eta: T,
    mode: usize,
}

impl<T: Real> LossChannel<T> {
    pub fn new(eta: T, mode: usize) -> Result<Self> {
        check_unit_interval(eta, "survival probability")?;
        Ok(Self { eta, mode })
    }

    pub fn eta(&self) -> T {
        self.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element<T: Real> {
    BeamSplitter(BeamSplitter<T>),
    PhaseShifter(PhaseShifter<T>),
    Dephaser(GaussianDephaser<T>),
    Loss(LossChannel<T>),
}

impl<T: Real> Element<T> {
    fn modes(&self) -> Vec<usize> {
        match self {
            Element::BeamSplitter(bs) => vec![bs.modes.0, bs.modes.1],
            Element::PhaseShifter(p) => vec![p.mode],
            Element::Dephaser(d) => vec![d.mode],
            Element::Loss(l) => vec![l.mode],
        }
    }
}

/// Ordered list of optical elements.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpticalCircuit<T: Real> {
    elements: Vec<Element<T>>,
}

impl<T: Real> OpticalCircuit<T> {
    pub fn new() -> Self {
        Self {
            elements: Vec::new(),
        }
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn push(&mut self, element: Element<T>) -> &mut Self {
        self.elements.push(element);
        self
    }

    pub fn beam_splitter(mut self, transmittance: T, i: usize, j: usize) -> Result<Self> {
        self.elements
            .push(Element::BeamSplitter(BeamSplitter::new(transmittance, i, j)?));
        Ok(self)
    }

    pub fn phase(mut self, phase: T, mode: usize) -> Self {
        self.elements
            .push(Element::PhaseShifter(PhaseShifter { phase, mode }));
        self
    }

    pub fn dephase(mut self, sigma: T, mode: usize) -> Result<Self> {
        self.elements
            .push(Element::Dephaser(GaussianDephaser::new(sigma, mode)?));
        Ok(self)
    }

    pub fn loss(mut self, eta: T, mode: usize) -> Result<Self> {
        self.elements.push(Element::Loss(LossChannel::new(eta, mode)?));
        Ok(self)
    }

    pub fn extend(&mut self, other: &OpticalCircuit<T>) {
        self.elements.extend_from_slice(&other.elements);
    }

    pub fn validate(&self, basis: &FockBasis) -> Result<()> {
        for e in &self.elements {
            for m in e.modes() {
                basis.check_mode(m)?;
            }
        }
        Ok(())
    }
}

fn check_unit_interval<T: Real>(x: T, what: &str) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "{what} {} outside [0, 1]",
            x.to_f64_lossy()
        )))
    }
}

/// Mode matrix of a beam splitter of intensity transmittance `t`.
pub fn bs_matrix<T: Real>(t: T) -> Result<Matrix2<Complex<T>>> {
    check_unit_interval(t, "transmittance")?;
    let tt = t.sqrt();
    let r = Complex::new(T::zero(), (T::one() - t).sqrt());
    Ok(Matrix2::new(c(tt), r, r, c(tt)))
}

/// Applies the elements of `circuit` in order.
pub fn apply_circuit<T: Real>(
    rho: &DensityOperator<T>,
    circuit: &OpticalCircuit<T>,
) -> Result<DensityOperator<T>> {
    circuit.validate(rho.basis())?;
    let mut state = rho.clone();
    for element in &circuit.elements {
        state = apply_element(&state, element)?;
    }
    Ok(state)
}

pub fn apply_element<T: Real>(rho: &DensityOperator<T>, element: &Element<T>) -> Result<DensityOperator<T>> {
    let basis = rho.basis();
    match *element {
        Element::BeamSplitter(bs) => {
            basis.check_mode(bs.modes.0)?;
            basis.check_mode(bs.modes.1)?;
            let u = lift_mode_unitary(&bs_matrix(bs.transmittance)?, basis, bs.modes)?;
            u.apply(rho)
        }
        Element::PhaseShifter(p) => phase_shift(rho, p.mode, p.phase),
        Element::Dephaser(d) => gaussian_dephase(rho, d.mode, d.sigma),
        Element::Loss(l) => loss(rho, l.mode, l.eta),
    }
}

/// Multiplies each element `rho[a,b]` by `weight(n_a - n_b)` where `n` is the
/// photon number of `mode`.
fn scale_by_photon_difference<T: Real>(
    rho: &DensityOperator<T>,
    mode: usize,
    weight: impl Fn(i64) -> Complex<T>,
) -> Result<DensityOperator<T>> {
    let basis = rho.basis();
    basis.check_mode(mode)?;
    let d = basis.dimension();
    let cutoff = basis.cutoff() as i64;
    let table: Vec<Complex<T>> = (-cutoff..=cutoff).map(&weight).collect();
    let n: Vec<i64> = (0..d).map(|i| basis.photons_in(i, mode) as i64).collect();
    let m = rho.matrix();
    let out = DMatrix::from_fn(d, d, |a, b| m[(a, b)] * table[(n[a] - n[b] + cutoff) as usize]);
    Ok(DensityOperator::new_unchecked(basis.clone(), out))
}

/// Conjugation by `exp(i phase n)` on `mode`.
pub fn phase_shift<T: Real>(rho: &DensityOperator<T>, mode: usize, phase: T) -> Result<DensityOperator<T>> {
    scale_by_photon_difference(rho, mode, |k| cis(phase * T::of(k as f64)))
}

/// Average of [`phase_shift`] over a zero-mean Gaussian phase of standard
/// deviation `sigma`: coherences between photon numbers `n` and `m` are
/// damped by `exp(-sigma^2 (n-m)^2 / 2)`.
pub fn gaussian_dephase<T: Real>(rho: &DensityOperator<T>, mode: usize, sigma: T) -> Result<DensityOperator<T>> {
    if !(sigma >= T::zero()) {
        return Err(Error::arg("dephasing sigma must be nonnegative"));
    }
    let half_var = sigma * sigma * T::of(0.5);
    scale_by_photon_difference(rho, mode, |k| {
        let k = T::of(k as f64);
        c((-half_var * k * k).exp())
    })
}

/// Loss modeled as a beam splitter of transmittance `eta` coupling `mode` to
/// a vacuum ancilla that is then traced out.
pub fn loss<T: Real>(rho: &DensityOperator<T>, mode: usize, eta: T) -> Result<DensityOperator<T>> {
    check_unit_interval(eta, "survival probability")?;
    let basis = rho.basis();
    basis.check_mode(mode)?;
    let n = basis.n_modes();
    let ancilla = DensityOperator::vacuum(&FockBasis::new(1, basis.cutoff())?);
    let extended = tensor(rho, &ancilla)?;
    let u = lift_mode_unitary(&bs_matrix(eta)?, extended.basis(), (mode, n))?;
    let mixed = u.apply(&extended)?;
    partial_trace(&mixed, &(0..n).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_basis, overlap_fidelity, PureState};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn single_photon(b: &FockBasis, mode: usize) -> DensityOperator<f64> {
        let mut occ = vec![0; b.n_modes()];
        occ[mode] = 1;
        PureState::basis_state(b, &occ).unwrap().projector()
    }

    fn psi_plus(b: &FockBasis) -> PureState<f64> {
        PureState::from_terms(b, &[(c(1.0), &[1, 0][..]), (c(1.0), &[0, 1][..])]).unwrap()
    }

    #[test]
    fn bs_matrix_examples() {
        let id = bs_matrix(1.0f64).unwrap();
        assert!((id - Matrix2::identity()).norm() < 1e-15);
        let b = bs_matrix(0.85f64).unwrap();
        assert!((b[(0, 0)].norm_sqr() - 0.85).abs() < 1e-15);
        assert!((b[(1, 0)].norm_sqr() - 0.15).abs() < 1e-15);
        assert!(bs_matrix(1.2f64).is_err());
        assert!(bs_matrix(-0.1f64).is_err());
    }

    #[test]
    fn bs_matrix_is_unitary_on_grid() {
        for k in 0..=100 {
            let u = bs_matrix(k as f64 / 100.0).unwrap();
            let p = u * u.adjoint();
            assert!((p - Matrix2::identity()).norm() < 1e-15, "T={}", k);
        }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let b = make_basis(2, 2).unwrap();
        let rho = single_photon(&b, 0);
        let out = apply_circuit(&rho, &OpticalCircuit::new()).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn balanced_splitter_creates_superposition() {
        let b = make_basis(2, 2).unwrap();
        let circuit = OpticalCircuit::new().beam_splitter(0.5, 0, 1).unwrap();
        let out = apply_circuit(&single_photon(&b, 0), &circuit).unwrap();
        assert!((out.element(&[1, 0], &[1, 0]).unwrap().re - 0.5).abs() < 1e-15);
        assert!((out.element(&[0, 1], &[0, 1]).unwrap().re - 0.5).abs() < 1e-15);
        assert!((out.element(&[1, 0], &[0, 1]).unwrap().norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn circuit_mode_validation() {
        let b = make_basis(2, 2).unwrap();
        let circuit = OpticalCircuit::new().phase(0.3, 5);
        assert!(apply_circuit(&single_photon(&b, 0), &circuit).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let b = make_basis(2, 1).unwrap();
        let psi = PureState::basis_state(&b, &[1, 1]).unwrap().projector();
        let circuit = OpticalCircuit::new().beam_splitter(0.5, 0, 1).unwrap();
        assert!(matches!(apply_circuit(&psi, &circuit), Err(Error::Overflow { .. })));
    }

    #[test]
    fn dephasing_examples() {
        let b = make_basis(2, 2).unwrap();
        let bell = psi_plus(&b);
        let rho = bell.projector();
        assert_eq!(gaussian_dephase(&rho, 1, 0.0).unwrap(), rho);

        let sigma = (2.0 * 2f64.ln()).sqrt();
        let damped = gaussian_dephase(&rho, 1, sigma).unwrap();
        let coh = damped.element(&[1, 0], &[0, 1]).unwrap();
        assert!((coh.re - 0.25).abs() < 1e-15);
        assert!((overlap_fidelity(&damped, &bell).unwrap() - 0.75).abs() < 1e-12);

        let lost = gaussian_dephase(&rho, 0, 60.0).unwrap();
        assert!((overlap_fidelity(&lost, &bell).unwrap() - 0.5).abs() < 1e-12);
        assert!(gaussian_dephase(&rho, 0, -1.0).is_err());
    }

    #[test]
    fn dephasing_composes_in_quadrature() {
        let b = make_basis(2, 2).unwrap();
        let rho = PureState::from_terms(
            &b,
            &[(c(1.0), &[1, 0][..]), (c(0.7), &[0, 1][..]), (c(0.4), &[2, 1][..]), (c(0.2), &[0, 2][..])],
        )
        .unwrap()
        .projector();
        for (s1, s2) in [(0.3, 0.4), (1.1, 0.2), (0.0, 2.0)] {
            let two = gaussian_dephase(&gaussian_dephase(&rho, 0, s1).unwrap(), 0, s2).unwrap();
            let one = gaussian_dephase(&rho, 0, f64::hypot(s1, s2)).unwrap();
            assert!((two.matrix() - one.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn dephasing_matches_sampled_phases() {
        let b = make_basis(2, 2).unwrap();
        let rho = psi_plus(&b).projector();
        let sigma = 0.9;
        let exact = gaussian_dephase(&rho, 1, sigma).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, sigma).unwrap();
        let n = 100_000;
        let d = b.dimension();
        let mut sum = DMatrix::<Complex<f64>>::zeros(d, d);
        let mut sum_sq = DMatrix::<f64>::zeros(d, d);
        for _ in 0..n {
            let phi = normal.sample(&mut rng);
            let m = phase_shift(&rho, 1, phi).unwrap();
            sum += m.matrix();
            sum_sq += m.matrix().map(|z| z.norm_sqr());
        }
        for i in 0..d {
            for j in 0..d {
                let mean = sum[(i, j)] / n as f64;
                let var = (sum_sq[(i, j)] / n as f64 - mean.norm_sqr()).max(0.0);
                let se = (var / n as f64).sqrt();
                let dev = (mean - exact.matrix()[(i, j)]).norm();
                assert!(dev <= 3.0 * se + 1e-12, "({i},{j}) dev {dev} se {se}");
            }
        }
    }

    #[test]
    fn loss_examples() {
        let b = make_basis(1, 2).unwrap();
        let one = single_photon(&b, 0);
        assert!((loss(&one, 0, 1.0).unwrap().matrix() - one.matrix()).norm() < 1e-15);
        let gone = loss(&one, 0, 0.0).unwrap();
        assert!((gone.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        let half = loss(&one, 0, 0.5).unwrap();
        assert!((half.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((half.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(loss(&one, 0, 1.5).is_err());
    }

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |a, t| a * (n - t) as f64 / (t + 1) as f64)
    }

    #[test]
    fn loss_matches_kraus_form() {
        // Amplitude-damping Kraus operators K_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>.
        let b = make_basis(2, 2).unwrap();
        let rho = PureState::from_terms(
            &b,
            &[(c(1.0), &[2, 0][..]), (Complex::new(0.3, 0.5), &[1, 1][..]), (c(0.6), &[0, 1][..])],
        )
        .unwrap()
        .projector();
        let eta = 0.37f64;
        let d = b.dimension();
        let mut expected = DMatrix::<Complex<f64>>::zeros(d, d);
        for k in 0..=2 {
            let mut kraus = DMatrix::<Complex<f64>>::zeros(d, d);
            for col in 0..d {
                let n = b.photons_in(col, 0);
                if n >= k {
                    let row = b.with_photons(col, 0, n - k);
                    kraus[(row, col)] = c((binom(n, k) * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt());
                }
            }
            expected += &kraus * rho.matrix() * kraus.adjoint();
        }
        let out = loss(&rho, 0, eta).unwrap();
        assert!((out.matrix() - expected).norm() < 1e-12);
    }
}
