use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use super::basis::FockBasis;
use crate::error::{Error, Result};
use crate::scalar::{abs, c, Real};

/// Normalized state vector on a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T: Real> {
    basis: FockBasis,
    amplitudes: DVector<Complex<T>>,
}

impl<T: Real> PureState<T> {
    /// Normalizes `amplitudes`; a zero vector is rejected.
    pub fn new(basis: FockBasis, amplitudes: DVector<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != basis.dimension() {
            return Err(Error::arg(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dimension()
            )));
        }
        let norm2 = amplitudes.iter().fold(T::zero(), |s, a| s + a.norm_sqr());
        if !(norm2 > T::zero()) {
            return Err(Error::arg("cannot normalize a zero state vector"));
        }
        let inv = T::one() / norm2.sqrt();
        Ok(Self {
            basis,
            amplitudes: amplitudes.map(|a| a * inv),
        })
    }

    /// Superposition of occupation-number states, normalized.
    pub fn from_terms(basis: &FockBasis, terms: &[(Complex<T>, &[usize])]) -> Result<Self> {
        let mut amps = DVector::zeros(basis.dimension());
        for (amp, occ) in terms {
            amps[basis.index_of(occ)?] += *amp;
        }
        Self::new(basis.clone(), amps)
    }

    pub fn basis_state(basis: &FockBasis, occupation: &[usize]) -> Result<Self> {
        Self::from_terms(basis, &[(c(T::one()), occupation)])
    }

    pub fn vacuum(basis: &FockBasis) -> Self {
        let mut amps = DVector::zeros(basis.dimension());
        amps[0] = c(T::one());
        Self {
            basis: basis.clone(),
            amplitudes: amps,
        }
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex<T>> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupation: &[usize]) -> Result<Complex<T>> {
        Ok(self.amplitudes[self.basis.index_of(occupation)?])
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState<T>) -> Result<Complex<T>> {
        if self.basis != other.basis {
            return Err(Error::arg("inner product across different bases"));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .fold(Complex::new(T::zero(), T::zero()), |s, (a, b)| {
                s + a.conj() * b
            }))
    }

    pub fn projector(&self) -> DensityOperator<T> {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator::new_unchecked(self.basis.clone(), m)
    }
}

/// Hermitian, positive, unit-trace operator over a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T: Real> {
    basis: FockBasis,
    matrix: DMatrix<Complex<T>>,
}

impl<T: Real> DensityOperator<T> {
    /// Validates Hermiticity, trace and positivity before accepting `matrix`.
    pub fn new(basis: FockBasis, matrix: DMatrix<Complex<T>>) -> Result<Self> {
        let d = basis.dimension();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::arg(format!(
                "matrix is {}x{}, basis dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let rho = Self { basis, matrix };
        rho.check_invariants()?;
        Ok(rho)
    }

    pub(crate) fn new_unchecked(basis: FockBasis, matrix: DMatrix<Complex<T>>) -> Self {
        debug_assert_eq!(matrix.nrows(), basis.dimension());
        Self { basis, matrix }
    }

    pub fn vacuum(basis: &FockBasis) -> Self {
        PureState::vacuum(basis).projector()
    }

    pub fn from_pure(psi: &PureState<T>) -> Self {
        psi.projector()
    }

    /// Convex combination; weights must be nonnegative and sum to one.
    pub fn mixture(components: &[(T, &DensityOperator<T>)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::arg("empty mixture"))?
            .1;
        let mut total = T::zero();
        let mut m = DMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in components {
            if rho.basis != first.basis {
                return Err(Error::arg("mixture components live on different bases"));
            }
            if *w < T::zero() {
                return Err(Error::arg("negative mixture weight"));
            }
            total += *w;
            m += rho.matrix.map(|z| z * *w);
        }
        if abs(total - T::one()) > T::of(T::STATE_TOL) {
            return Err(Error::arg("mixture weights do not sum to one"));
        }
        Ok(Self::new_unchecked(first.basis.clone(), m))
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.matrix
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.basis.dimension()
    }

    pub fn element(&self, row: &[usize], col: &[usize]) -> Result<Complex<T>> {
        Ok(self.matrix[(self.basis.index_of(row)?, self.basis.index_of(col)?)])
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).fold(T::zero(), |s, i| s + self.matrix[(i, i)].re)
    }

    pub fn purity(&self) -> T {
        self.matrix
            .iter()
            .fold(T::zero(), |s, z| s + z.norm_sqr())
    }

    /// Population of the basis vectors selected by `keep`.
    pub fn weight_where(&self, keep: impl Fn(usize) -> bool) -> T {
        (0..self.dim())
            .filter(|&i| keep(i))
            .fold(T::zero(), |s, i| s + self.matrix[(i, i)].re)
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim() {
            for j in 0..=i {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm_sqr().sqrt();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> T {
        let herm = (&self.matrix + self.matrix.adjoint()).map(|z| z * T::of(0.5));
        let eig = SymmetricEigen::new(herm);
        eig.eigenvalues
            .iter()
            .fold(T::max_value().unwrap_or(T::one()), |m, &v| if v < m { v } else { m })
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        let herm = (&self.matrix + self.matrix.adjoint()).map(|z| z * T::of(0.5));
        let mut ev: Vec<T> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    /// Checks Hermiticity, positivity and unit trace.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_invariants_with_trace(T::one())
    }

    /// As [`check_invariants`](Self::check_invariants) for an operator whose
    /// declared trace is `weight`.
    pub fn check_invariants_with_trace(&self, weight: T) -> Result<()> {
        let tol = T::of(T::STATE_TOL);
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::arg(format!(
                "operator is not Hermitian (max deviation {:e})",
                herm.to_f64_lossy()
            )));
        }
        let tr = self.trace();
        if abs(tr - weight) > tol {
            return Err(Error::arg(format!(
                "trace {} differs from {}",
                tr.to_f64_lossy(),
                weight.to_f64_lossy()
            )));
        }
        let min = self.min_eigenvalue();
        if min < -T::of(T::EIGEN_TOL) {
            return Err(Error::arg(format!(
                "operator has negative eigenvalue {:e}",
                min.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// Rescales to unit trace. Fails on a vanishing trace.
    pub(crate) fn normalized(basis: FockBasis, matrix: DMatrix<Complex<T>>) -> Result<(Self, T)> {
        let tr = (0..matrix.nrows()).fold(T::zero(), |s, i| s + matrix[(i, i)].re);
        if !(tr > T::zero()) {
            return Err(Error::DegenerateOutcome(
                "conditional state has zero weight".into(),
            ));
        }
        let inv = T::one() / tr;
        Ok((Self::new_unchecked(basis, matrix.map(|z| z * inv)), tr))
    }

    /// Projects onto the basis vectors selected by `keep` and renormalizes.
    pub fn postselect(&self, keep: impl Fn(usize) -> bool) -> Result<(Self, T)> {
        let d = self.dim();
        let mask: Vec<bool> = (0..d).map(&keep).collect();
        let m = DMatrix::from_fn(d, d, |i, j| {
            if mask[i] && mask[j] {
                self.matrix[(i, j)]
            } else {
                Complex::new(T::zero(), T::zero())
            }
        });
        Self::normalized(self.basis.clone(), m)
    }
}

/// Kronecker product; modes of `b` follow those of `a`.
pub fn tensor<T: Real>(a: &DensityOperator<T>, b: &DensityOperator<T>) -> Result<DensityOperator<T>> {
    if a.basis.cutoff() != b.basis.cutoff() {
        return Err(Error::Configuration(format!(
            "cannot tensor bases with cutoffs {} and {}",
            a.basis.cutoff(),
            b.basis.cutoff()
        )));
    }
    let basis = FockBasis::new(a.basis.n_modes() + b.basis.n_modes(), a.basis.cutoff())?;
    Ok(DensityOperator::new_unchecked(basis, a.matrix.kronecker(&b.matrix)))
}

/// Tensor product of several operators, in order.
pub fn tensor_all<T: Real>(parts: &[&DensityOperator<T>]) -> Result<DensityOperator<T>> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::arg("empty tensor product"))?;
    rest.iter()
        .try_fold((*first).clone(), |acc, r| tensor(&acc, r))
}

/// Reduced state on `keep_modes`, in the order given.
pub fn partial_trace<T: Real>(rho: &DensityOperator<T>, keep_modes: &[usize]) -> Result<DensityOperator<T>> {
    let m = partial_trace_matrix(&rho.basis, &rho.matrix, keep_modes)?;
    let basis = rho.basis.sub_basis(keep_modes.len())?;
    Ok(DensityOperator::new_unchecked(basis, m))
}

pub(crate) fn partial_trace_matrix<T: Real>(
    basis: &FockBasis,
    matrix: &DMatrix<Complex<T>>,
    keep_modes: &[usize],
) -> Result<DMatrix<Complex<T>>> {
    if keep_modes.is_empty() {
        return Err(Error::arg("partial trace must keep at least one mode"));
    }
    let mut seen = vec![false; basis.n_modes()];
    for &k in keep_modes {
        basis.check_mode(k)?;
        if seen[k] {
            return Err(Error::arg(format!("mode {k} listed twice in keep set")));
        }
        seen[k] = true;
    }
    let traced: Vec<usize> = (0..basis.n_modes()).filter(|&k| !seen[k]).collect();
    let levels = basis.cutoff() + 1;
    let kept_dim = levels.pow(keep_modes.len() as u32);
    let traced_dim = levels.pow(traced.len() as u32);

    let digits = |i: usize, modes: &[usize]| {
        modes
            .iter()
            .fold(0, |acc, &m| acc * levels + basis.photons_in(i, m))
    };
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); traced_dim];
    for i in 0..basis.dimension() {
        groups[digits(i, &traced)].push((i, digits(i, keep_modes)));
    }
    let mut out = DMatrix::zeros(kept_dim, kept_dim);
    for group in &groups {
        for &(i, ki) in group {
            for &(j, kj) in group {
                out[(ki, kj)] += matrix[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `<psi| rho |psi>`, the overlap fidelity with a pure target.
pub fn overlap_fidelity<T: Real>(rho: &DensityOperator<T>, psi: &PureState<T>) -> Result<T> {
    if rho.basis != psi.basis {
        return Err(Error::arg("fidelity across different bases"));
    }
    let v = &psi.amplitudes;
    let rv = &rho.matrix * v;
    let f = v
        .iter()
        .zip(rv.iter())
        .fold(Complex::new(T::zero(), T::zero()), |s, (a, b)| s + a.conj() * b);
    if abs(f.im) > T::of(T::STATE_TOL) {
        return Err(Error::arg(format!(
            "fidelity has imaginary residue {:e}",
            f.im.to_f64_lossy()
        )));
    }
    Ok(clamp01(f.re))
}

pub(crate) fn clamp01<T: Real>(x: T) -> T {
    if x < T::zero() {
        T::zero()
    } else if x > T::one() {
        T::one()
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::make_basis;

    fn psi(sign: f64) -> PureState<f64> {
        let b = make_basis(2, 2).unwrap();
        PureState::from_terms(&b, &[(c(1.0), &[1, 0][..]), (c(sign), &[0, 1][..])]).unwrap()
    }

    fn mixed(f: f64) -> DensityOperator<f64> {
        DensityOperator::mixture(&[(f, &psi(1.0).projector()), (1.0 - f, &psi(-1.0).projector())]).unwrap()
    }

    #[test]
    fn pure_state_is_normalized() {
        let p = psi(1.0);
        let n: f64 = p.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(PureState::<f64>::new(make_basis(1, 1).unwrap(), DVector::zeros(2)).is_err());
    }

    #[test]
    fn tensor_of_vacua() {
        let b = make_basis(1, 2).unwrap();
        let v = DensityOperator::<f64>::vacuum(&b);
        let vv = tensor(&v, &v).unwrap();
        assert_eq!(vv.basis().n_modes(), 2);
        assert!((vv.element(&[0, 0], &[0, 0]).unwrap().re - 1.0).abs() < 1e-15);
        assert!((vv.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tensor_of_bell_projectors_is_rank_one() {
        let p = psi(1.0).projector();
        let pp = tensor(&p, &p).unwrap();
        assert!((pp.trace() - 1.0).abs() < 1e-12);
        assert!((pp.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_of_mixed_pairs_has_unit_trace() {
        let r = mixed(0.75);
        let rr = tensor(&r, &r).unwrap();
        assert_eq!(rr.dim(), 81);
        let direct: f64 = (0..81).map(|i| rr.matrix()[(i, i)].re).sum();
        assert!((direct - 1.0).abs() < 1e-12);
        rr.check_invariants().unwrap();
    }

    #[test]
    fn tensor_rejects_mixed_cutoffs() {
        let a = DensityOperator::<f64>::vacuum(&make_basis(1, 1).unwrap());
        let b = DensityOperator::<f64>::vacuum(&make_basis(1, 2).unwrap());
        assert!(matches!(tensor(&a, &b), Err(Error::Configuration(_))));
    }

    #[test]
    fn half_of_bell_state_is_maximally_mixed() {
        let red = partial_trace(&psi(1.0).projector(), &[0]).unwrap();
        assert!((red.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((red.matrix()[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!(red.matrix()[(0, 1)].norm() < 1e-12);
        assert!(red.matrix()[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn trace_of_vacuum_pair() {
        let b = make_basis(2, 2).unwrap();
        let v = DensityOperator::<f64>::vacuum(&b);
        let red = partial_trace(&v, &[1]).unwrap();
        assert!((red.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_argument_errors() {
        let v = DensityOperator::<f64>::vacuum(&make_basis(2, 1).unwrap());
        assert!(partial_trace(&v, &[]).is_err());
        assert!(partial_trace(&v, &[2]).is_err());
        assert!(partial_trace(&v, &[0, 0]).is_err());
    }

    #[test]
    fn partial_trace_respects_order() {
        let b = make_basis(2, 1).unwrap();
        let s = PureState::<f64>::basis_state(&b, &[1, 0]).unwrap().projector();
        let swapped = partial_trace(&s, &[1, 0]).unwrap();
        assert!((swapped.element(&[0, 1], &[0, 1]).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        assert!((overlap_fidelity(&psi(1.0).projector(), &psi(1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(overlap_fidelity(&psi(-1.0).projector(), &psi(1.0)).unwrap().abs() < 1e-12);
        assert!((overlap_fidelity(&mixed(0.75), &psi(1.0)).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn fidelity_basis_mismatch() {
        let other = PureState::<f64>::vacuum(&make_basis(2, 1).unwrap());
        assert!(overlap_fidelity(&mixed(0.6), &other).is_err());
    }

    #[test]
    fn invariants_reject_bad_matrices() {
        let b = make_basis(1, 1).unwrap();
        let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.3), c(0.0), c(0.5)]);
        assert!(DensityOperator::new(b.clone(), not_herm).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(DensityOperator::new(b.clone(), neg).is_err());
        let bad_trace = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.4)]);
        assert!(DensityOperator::new(b, bad_trace).is_err());
    }

    #[test]
    fn postselect_renormalizes() {
        let b = make_basis(1, 1).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[c(0.25), c(0.0), c(0.0), c(0.75)]);
        let rho = DensityOperator::<f64>::new(b, m).unwrap();
        let (post, w): (DensityOperator<f64>, f64) = rho.postselect(|i| i == 1).unwrap();
        assert!((w - 0.75).abs() < 1e-15);
        assert!((post.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!(matches!(
            rho.postselect(|_| false),
            Err(Error::DegenerateOutcome(_))
        ));
    }
}
