//! Scalar abstraction for the Fock-space layer.
//!
//! Everything from the basis up to the protocol is generic over a real
//! field type. `f64` is the working precision; `f32` is supported with
//! proportionally looser invariant tolerances.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the simulator.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Tolerance on Hermiticity and trace of density operators.
    const STATE_TOL: f64;
    /// Lower bound accepted for density-operator eigenvalues (negated).
    const EIGEN_TOL: f64;
    /// Tolerance on unitarity of lifted operators.
    const UNITARY_TOL: f64;
    /// Outcome probabilities at or below this are treated as impossible.
    const DEGENERATE_PROB: f64;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const STATE_TOL: f64 = 1e-12;
    const EIGEN_TOL: f64 = 1e-10;
    const UNITARY_TOL: f64 = 1e-10;
    const DEGENERATE_PROB: f64 = 1e-15;
}

impl Real for f32 {
    const STATE_TOL: f64 = 1e-5;
    const EIGEN_TOL: f64 = 1e-4;
    const UNITARY_TOL: f64 = 1e-5;
    const DEGENERATE_PROB: f64 = 1e-7;
}

/// Absolute value without the `Signed`/`ComplexField` method ambiguity.
#[inline]
pub(crate) fn abs<T: Real>(x: T) -> T {
    if x < T::zero() {
        -x
    } else {
        x
    }
}

/// `exp(i * phase)`.
#[inline]
pub(crate) fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub(crate) fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
