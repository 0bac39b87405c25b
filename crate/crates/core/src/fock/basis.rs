use crate::error::{Error, Result};

/// Default upper bound on the Hilbert-space dimension accepted by
/// [`FockBasis::new`].
pub const DEFAULT_DIMENSION_CAP: usize = 1_000_000;

/// Truncated multimode Fock basis.
///
/// Each of the `n_modes` modes holds `0..=cutoff` photons. Basis vectors are
/// ordered lexicographically by occupation vector with mode 0 as the most
/// significant digit, i.e. the index of `(n_0, ..., n_{M-1})` is
/// `sum_k n_k (cutoff+1)^(M-1-k)`. This makes the Kronecker product of two
/// bases the concatenation of their mode lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockBasis {
    n_modes: usize,
    cutoff: usize,
    dimension: usize,
}

impl FockBasis {
    pub fn new(n_modes: usize, max_photons_per_mode: usize) -> Result<Self> {
        Self::with_cap(n_modes, max_photons_per_mode, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(n_modes: usize, max_photons_per_mode: usize, cap: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::arg("basis needs at least one mode"));
        }
        if max_photons_per_mode == 0 {
            return Err(Error::arg("max_photons_per_mode must be at least 1"));
        }
        let levels = (max_photons_per_mode + 1) as u128;
        let mut dimension: u128 = 1;
        for _ in 0..n_modes {
            dimension = dimension.saturating_mul(levels);
        }
        if dimension > cap as u128 {
            return Err(Error::Sizing {
                n_modes,
                cutoff: max_photons_per_mode,
                dimension,
                cap,
            });
        }
        Ok(Self {
            n_modes,
            cutoff: max_photons_per_mode,
            dimension: dimension as usize,
        })
    }

    #[inline]
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Maximum photon number per mode.
    #[inline]
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    fn levels(&self) -> usize {
        self.cutoff + 1
    }

    /// Stride of `mode` in the flat index.
    #[inline]
    pub(crate) fn stride(&self, mode: usize) -> usize {
        self.levels().pow((self.n_modes - 1 - mode) as u32)
    }

    /// Occupation vector of basis vector `index`.
    pub fn occupation(&self, index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes];
        let mut rest = index;
        for k in (0..self.n_modes).rev() {
            occ[k] = rest % self.levels();
            rest /= self.levels();
        }
        occ
    }

    /// Photon number of a single mode in basis vector `index`.
    #[inline]
    pub fn photons_in(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.levels()
    }

    pub fn total_photons(&self, index: usize) -> usize {
        (0..self.n_modes).map(|m| self.photons_in(index, m)).sum()
    }

    pub fn index_of(&self, occupation: &[usize]) -> Result<usize> {
        if occupation.len() != self.n_modes {
            return Err(Error::arg(format!(
                "occupation has {} entries, basis has {} modes",
                occupation.len(),
                self.n_modes
            )));
        }
        let mut index = 0;
        for &n in occupation {
            if n > self.cutoff {
                return Err(Error::arg(format!(
                    "occupation {n} exceeds cutoff {}",
                    self.cutoff
                )));
            }
            index = index * self.levels() + n;
        }
        Ok(index)
    }

    /// Index obtained by replacing the photon number of `mode`.
    #[inline]
    pub(crate) fn with_photons(&self, index: usize, mode: usize, n: usize) -> usize {
        let s = self.stride(mode);
        index - self.photons_in(index, mode) * s + n * s
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            Err(Error::arg(format!(
                "mode {mode} out of range for {}-mode basis",
                self.n_modes
            )))
        } else {
            Ok(())
        }
    }

    /// Basis over the given subset of modes (same cutoff).
    pub(crate) fn sub_basis(&self, n_modes: usize) -> Result<Self> {
        FockBasis::with_cap(n_modes, self.cutoff, usize::MAX)
    }
}

/// Builds a basis with the default dimension cap.
pub fn make_basis(n_modes: usize, max_photons_per_mode: usize) -> Result<FockBasis> {
    FockBasis::new(n_modes, max_photons_per_mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(make_basis(1, 1).unwrap().dimension(), 2);
        assert_eq!(make_basis(2, 2).unwrap().dimension(), 9);
        assert_eq!(make_basis(8, 2).unwrap().dimension(), 3usize.pow(8));
    }

    #[test]
    fn cap_is_enforced() {
        let err = make_basis(20, 2).unwrap_err();
        match err {
            Error::Sizing { dimension, .. } => assert_eq!(dimension, 3u128.pow(20)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(FockBasis::with_cap(3, 2, 26).is_err());
        assert!(FockBasis::with_cap(3, 2, 27).is_ok());
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(make_basis(0, 2).is_err());
        assert!(make_basis(2, 0).is_err());
    }

    #[test]
    fn ordering_is_lexicographic() {
        let b = make_basis(2, 2).unwrap();
        assert_eq!(b.occupation(0), vec![0, 0]);
        assert_eq!(b.occupation(1), vec![0, 1]);
        assert_eq!(b.occupation(3), vec![1, 0]);
        assert_eq!(b.occupation(8), vec![2, 2]);
        assert_eq!(b.index_of(&[1, 2]).unwrap(), 5);
        assert!(b.index_of(&[3, 0]).is_err());
        assert!(b.index_of(&[1]).is_err());
    }

    #[test]
    fn round_trip_all_indices() {
        for (m, c) in [(1, 1), (3, 2), (4, 3), (8, 2)] {
            let b = make_basis(m, c).unwrap();
            for i in 0..b.dimension() {
                let occ = b.occupation(i);
                assert_eq!(b.index_of(&occ).unwrap(), i);
                for (k, &n) in occ.iter().enumerate() {
                    assert_eq!(b.photons_in(i, k), n);
                }
            }
        }
    }

    #[test]
    fn with_photons_replaces_one_digit() {
        let b = make_basis(3, 2).unwrap();
        let i = b.index_of(&[1, 0, 2]).unwrap();
        let j = b.with_photons(i, 1, 2);
        assert_eq!(b.occupation(j), vec![1, 2, 2]);
    }
}
