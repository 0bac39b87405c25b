//! Truncated Fock-space linear algebra.

mod basis;
mod state;
mod unitary;

pub use basis::{make_basis, FockBasis, DEFAULT_DIMENSION_CAP};
pub use state::{overlap_fidelity, partial_trace, tensor, tensor_all, DensityOperator, PureState};
pub use unitary::{annihilation, lift_mode_unitary, lift_via_generator, FockUnitary};

pub(crate) use state::{clamp01, partial_trace_matrix};
