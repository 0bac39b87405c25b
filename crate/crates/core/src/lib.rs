//! Fock-space simulation of single-photon entanglement purification with
//! linear optics, a Monte Carlo model of the fringe experiment, and the
//! fringe analysis used on its output.
//!
//! The circuit layer is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar. The experiment and analysis layers are `f64` only.

pub mod analysis;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod optics;
pub mod protocol;
pub mod report;
pub mod scalar;
pub mod scan;

pub use error::{Error, Result};
pub use fock::{make_basis, FockBasis};
pub use scalar::Real;

pub type PureState = fock::PureState<f64>;
pub type DensityOperator = fock::DensityOperator<f64>;
pub type FockUnitary = fock::FockUnitary<f64>;
pub type OpticalCircuit = optics::OpticalCircuit<f64>;
pub type DetectorModel = detection::DetectorModel<f64>;
pub type PurificationSetup = protocol::PurificationSetup<f64>;
pub type PurificationOutcome = protocol::PurificationOutcome<f64>;
pub type EntangledPairSpec = protocol::EntangledPairSpec<f64>;

pub type PureState32 = fock::PureState<f32>;
pub type DensityOperator32 = fock::DensityOperator<f32>;
pub type FockUnitary32 = fock::FockUnitary<f32>;
pub type OpticalCircuit32 = optics::OpticalCircuit<f32>;
pub type DetectorModel32 = detection::DetectorModel<f32>;
pub type PurificationSetup32 = protocol::PurificationSetup<f32>;
pub type PurificationOutcome32 = protocol::PurificationOutcome<f32>;
pub type EntangledPairSpec32 = protocol::EntangledPairSpec<f32>;
