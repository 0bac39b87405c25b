use nalgebra::{Complex, DMatrix, Matrix2};

use super::basis::FockBasis;
use super::state::{DensityOperator, PureState};
use crate::error::{Error, Result};
use crate::scalar::{c, Real};

/// Two-mode linear-optical unitary lifted to a truncated Fock basis.
///
/// The operator is stored as sparse rows; it conserves photon number on the
/// two modes it acts on, so each row has at most `cutoff + 1` entries.
/// Basis vectors with more than `cutoff` photons shared by the two modes form
/// the overflow sector: the exact image of such a vector does not fit in the
/// truncated space, so the operator acts there as the identity and
/// [`FockUnitary::apply`] refuses states with support on it.
#[derive(Debug, Clone)]
pub struct FockUnitary<T: Real> {
    basis: FockBasis,
    modes: (usize, usize),
    rows: Vec<Vec<(usize, Complex<T>)>>,
    overflow: Vec<bool>,
}

impl<T: Real> FockUnitary<T> {
    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn modes(&self) -> (usize, usize) {
        self.modes
    }

    /// Whether basis vector `index` lies in the overflow sector.
    pub fn is_overflow(&self, index: usize) -> bool {
        self.overflow[index]
    }

    pub fn overflow_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.overflow
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| o.then_some(i))
    }

    /// Dense matrix representation.
    pub fn matrix(&self) -> DMatrix<Complex<T>> {
        let d = self.basis.dimension();
        let mut m = DMatrix::zeros(d, d);
        for (r, row) in self.rows.iter().enumerate() {
            for &(col, v) in row {
                m[(r, col)] = v;
            }
        }
        m
    }

    fn overflow_weight(&self, diag: impl Fn(usize) -> T) -> T {
        self.overflow_indices().fold(T::zero(), |s, i| s + diag(i))
    }

    fn check_support(&self, weight: T) -> Result<()> {
        if weight > T::of(T::STATE_TOL) {
            return Err(Error::Overflow {
                i: self.modes.0,
                j: self.modes.1,
                weight: weight.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// `U rho U^dagger`.
    pub fn apply(&self, rho: &DensityOperator<T>) -> Result<DensityOperator<T>> {
        if rho.basis() != &self.basis {
            return Err(Error::arg("unitary and state live on different bases"));
        }
        let m = self.conjugate_matrix(rho.matrix())?;
        Ok(DensityOperator::new_unchecked(self.basis.clone(), m))
    }

    pub(crate) fn conjugate_matrix(&self, rho: &DMatrix<Complex<T>>) -> Result<DMatrix<Complex<T>>> {
        self.check_support(self.overflow_weight(|i| rho[(i, i)].re))?;
        // X = U rho, then (U X^dagger)^dagger = X U^dagger.
        let x = self.left_multiply(rho);
        Ok(self.left_multiply(&x.adjoint()).adjoint())
    }

    fn left_multiply(&self, m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
        let d = self.basis.dimension();
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = DMatrix::from_element(d, m.ncols(), zero);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, u) in row {
                for col in 0..m.ncols() {
                    out[(r, col)] += u * m[(k, col)];
                }
            }
        }
        out
    }

    pub fn apply_to_state(&self, psi: &PureState<T>) -> Result<PureState<T>> {
        if psi.basis() != &self.basis {
            return Err(Error::arg("unitary and state live on different bases"));
        }
        let a = psi.amplitudes();
        self.check_support(self.overflow_weight(|i| a[i].norm_sqr()))?;
        let mut out = nalgebra::DVector::zeros(a.len());
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, u) in row {
                out[r] += u * a[k];
            }
        }
        PureState::new(self.basis.clone(), out)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn check_pair(basis: &FockBasis, modes: (usize, usize)) -> Result<()> {
    basis.check_mode(modes.0)?;
    basis.check_mode(modes.1)?;
    if modes.0 == modes.1 {
        return Err(Error::arg("two-mode unitary needs distinct modes"));
    }
    Ok(())
}

pub(crate) fn unitarity_error<T: Real>(u: &Matrix2<Complex<T>>) -> T {
    let p = u.adjoint() * u;
    let mut worst = T::zero();
    for r in 0..2 {
        for col in 0..2 {
            let target = if r == col { T::one() } else { T::zero() };
            let d = (p[(r, col)] - c(target)).norm_sqr().sqrt();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Lifts a 2x2 mode transformation to the Fock basis by the closed-form
/// binomial expansion.
///
/// Convention: the creation operator of mode `i` maps to
/// `u[(0,0)] a_i^+ + u[(1,0)] a_j^+`, and that of `j` to
/// `u[(0,1)] a_i^+ + u[(1,1)] a_j^+`, so on the one-photon states
/// `|1,0>`, `|0,1>` the lifted operator is `u` itself.
pub fn lift_mode_unitary<T: Real>(
    u: &Matrix2<Complex<T>>,
    basis: &FockBasis,
    modes: (usize, usize),
) -> Result<FockUnitary<T>> {
    check_pair(basis, modes)?;
    let err = unitarity_error(u);
    if err > T::of(T::STATE_TOL) {
        return Err(Error::arg(format!(
            "mode matrix is not unitary (deviation {:e})",
            err.to_f64_lossy()
        )));
    }
    let (i, j) = modes;
    let cutoff = basis.cutoff();
    let d = basis.dimension();
    let zero = Complex::new(T::zero(), T::zero());

    // Powers of each matrix entry up to the cutoff.
    let powers = |z: Complex<T>| {
        let mut v = vec![c(T::one())];
        for k in 1..=cutoff {
            v.push(v[k - 1] * z);
        }
        v
    };
    let (p00, p10, p01, p11) = (
        powers(u[(0, 0)]),
        powers(u[(1, 0)]),
        powers(u[(0, 1)]),
        powers(u[(1, 1)]),
    );

    let mut rows: Vec<Vec<(usize, Complex<T>)>> = vec![Vec::new(); d];
    let mut overflow = vec![false; d];
    for col in 0..d {
        let n = basis.photons_in(col, i);
        let m = basis.photons_in(col, j);
        let total = n + m;
        if total > cutoff {
            overflow[col] = true;
            rows[col].push((col, c(T::one())));
            continue;
        }
        let base = basis.with_photons(basis.with_photons(col, i, 0), j, 0);
        for p in 0..=total {
            let mut amp = zero;
            for k in p.saturating_sub(m)..=p.min(n) {
                let l = p - k;
                let coef = binomial(n, k) * binomial(m, l);
                amp += p00[k] * p10[n - k] * p01[l] * p11[m - l] * T::of(coef);
            }
            let norm = (factorial(p) * factorial(total - p) / (factorial(n) * factorial(m))).sqrt();
            amp *= T::of(norm);
            if amp.norm_sqr() > T::zero() {
                let row = basis.with_photons(basis.with_photons(base, i, p), j, total - p);
                rows[row].push((col, amp));
            }
        }
    }
    Ok(FockUnitary {
        basis: basis.clone(),
        modes,
        rows,
        overflow,
    })
}

/// Truncated annihilation operator of `mode` as a dense matrix.
pub fn annihilation<T: Real>(basis: &FockBasis, mode: usize) -> Result<DMatrix<Complex<T>>> {
    basis.check_mode(mode)?;
    let d = basis.dimension();
    let mut a = DMatrix::zeros(d, d);
    for col in 0..d {
        let n = basis.photons_in(col, mode);
        if n > 0 {
            let row = basis.with_photons(col, mode, n - 1);
            a[(row, col)] = c(T::of((n as f64).sqrt()));
        }
    }
    Ok(a)
}

/// Lifts `exp(i K)` by exponentiating the second-quantized generator
/// `sum_{l,k} K[l,k] a_l^+ a_k` built from truncated ladder operators.
///
/// Independent of [`lift_mode_unitary`]; the two agree on every
/// non-overflow sector. Dense, so intended for small bases.
pub fn lift_via_generator<T: Real>(
    generator: &Matrix2<Complex<T>>,
    basis: &FockBasis,
    modes: (usize, usize),
) -> Result<DMatrix<Complex<T>>> {
    check_pair(basis, modes)?;
    let ops = [annihilation::<T>(basis, modes.0)?, annihilation::<T>(basis, modes.1)?];
    let d = basis.dimension();
    let mut h = DMatrix::zeros(d, d);
    for l in 0..2 {
        for k in 0..2 {
            let term = ops[l].adjoint() * &ops[k];
            h += term.map(|z| z * generator[(l, k)]);
        }
    }
    let ih = h.map(|z| z * Complex::new(T::zero(), T::one()));
    Ok(ih.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::make_basis;

    fn bs(t: f64) -> Matrix2<Complex<f64>> {
        let r = (1.0 - t).sqrt();
        Matrix2::new(c(t.sqrt()), Complex::new(0.0, r), Complex::new(0.0, r), c(t.sqrt()))
    }

    #[test]
    fn identity_lifts_to_identity() {
        let b = make_basis(3, 2).unwrap();
        let u = lift_mode_unitary::<f64>(&Matrix2::identity(), &b, (0, 2)).unwrap();
        let m = u.matrix();
        assert!((m - DMatrix::identity(27, 27)).norm() < 1e-14);
    }

    #[test]
    fn one_photon_block_is_the_mode_matrix() {
        let b = make_basis(2, 2).unwrap();
        let u = lift_mode_unitary(&bs(0.85), &b, (0, 1)).unwrap();
        let psi = PureState::basis_state(&b, &[1, 0]).unwrap();
        let out = u.apply_to_state(&psi).unwrap();
        let a10 = out.amplitude(&[1, 0]).unwrap();
        let a01 = out.amplitude(&[0, 1]).unwrap();
        assert!((a10 - c(0.85f64.sqrt())).norm() < 1e-14);
        assert!((a01 - Complex::new(0.0, 0.15f64.sqrt())).norm() < 1e-14);
    }

    #[test]
    fn balanced_splitter_bunches_two_photons() {
        let b = make_basis(2, 2).unwrap();
        let u = lift_mode_unitary(&bs(0.5), &b, (0, 1)).unwrap();
        let out = u
            .apply_to_state(&PureState::basis_state(&b, &[1, 1]).unwrap())
            .unwrap();
        assert!(out.amplitude(&[1, 1]).unwrap().norm() < 1e-15);
        assert!((out.amplitude(&[2, 0]).unwrap().norm_sqr() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = make_basis(2, 2).unwrap();
        let not_unitary = Matrix2::new(c(1.0), c(1.0), c(0.0), c(1.0));
        assert!(lift_mode_unitary(&not_unitary, &b, (0, 1)).is_err());
        assert!(lift_mode_unitary(&bs(0.3), &b, (1, 1)).is_err());
        assert!(lift_mode_unitary(&bs(0.3), &b, (0, 2)).is_err());
    }

    #[test]
    fn overflow_support_is_rejected() {
        let b = make_basis(2, 2).unwrap();
        let u = lift_mode_unitary(&bs(0.5), &b, (0, 1)).unwrap();
        let psi = PureState::basis_state(&b, &[2, 1]).unwrap();
        assert!(u.is_overflow(b.index_of(&[2, 1]).unwrap()));
        assert!(matches!(u.apply(&psi.projector()), Err(Error::Overflow { .. })));
    }

    #[test]
    fn closed_form_matches_generator_route() {
        let b = make_basis(2, 2).unwrap();
        for t in [0.0f64, 0.15, 0.5, 0.8535533905932737, 1.0] {
            let theta = t.sqrt().acos();
            // exp(i theta sigma_x) = cos(theta) I + i sin(theta) sigma_x
            let gen = Matrix2::new(c(0.0), c(theta), c(theta), c(0.0));
            let dense = lift_via_generator(&gen, &b, (0, 1)).unwrap();
            let closed = lift_mode_unitary(&bs(t), &b, (0, 1)).unwrap();
            let cm = closed.matrix();
            for r in 0..b.dimension() {
                for col in 0..b.dimension() {
                    if closed.is_overflow(r) || closed.is_overflow(col) {
                        continue;
                    }
                    assert!((dense[(r, col)] - cm[(r, col)]).norm() < 1e-10, "T={t} ({r},{col})");
                }
            }
        }
    }

    #[test]
    fn safe_sector_is_unitary() {
        let b = make_basis(3, 2).unwrap();
        let u = lift_mode_unitary(&bs(0.3), &b, (2, 0)).unwrap().matrix();
        let p = u.adjoint() * &u;
        assert!((p - DMatrix::identity(27, 27)).norm() < 1e-12);
    }
}
