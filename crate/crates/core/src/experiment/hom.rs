//! Hong-Ou-Mandel dip of the two photons of the source.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{coincidence_probability, DetectorModel, DetectorPort};
use crate::error::{Error, Result};
use crate::fock::{make_basis, DensityOperator, PureState};
use crate::optics::{apply_circuit, OpticalCircuit};
use crate::scan::{FringeScan, ScanMetadata, NOISE_OFF};

use super::config::SourceModel;
use super::{poisson, point_stream, ScanId};

/// Below this many expected counts at the top of the dip the visibility
/// is flagged as unreliable.
pub const MIN_STABLE_COUNTS: f64 = 100.0;

/// Relative visibility loss from double pairs, `2p / (1 + 3p)`.
pub fn double_pair_penalty(p: f64) -> f64 {
    2.0 * p / (1.0 + 3.0 * p)
}

fn both_ports_click(rho: &DensityOperator<f64>, left: Vec<usize>, right: Vec<usize>) -> Result<f64> {
    let det = DetectorModel::ideal_threshold();
    coincidence_probability(rho, &DetectorPort::new(left, det), &DetectorPort::new(right, det))
}

/// Coincidence probability behind a 50/50 splitter for one photon in each
/// input whose internal states overlap by `overlap`. The overlapping part
/// interferes; the orthogonal part is simulated on a second copy of the
/// modes that never meets the first.
pub fn single_pair_coincidence(overlap: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::arg(format!("overlap {overlap} outside [0, 1]")));
    }
    let same = {
        let basis = make_basis(2, 2)?;
        let rho = PureState::basis_state(&basis, &[1, 1])?.projector();
        let out = apply_circuit(&rho, &OpticalCircuit::new().beam_splitter(0.5, 0, 1)?)?;
        both_ports_click(&out, vec![0], vec![1])?
    };
    let orthogonal = {
        // modes (in0, in1) with label 0, then with label 1
        let basis = make_basis(4, 1)?;
        let rho = PureState::basis_state(&basis, &[1, 0, 0, 1])?.projector();
        let circuit = OpticalCircuit::new().beam_splitter(0.5, 0, 1)?.beam_splitter(0.5, 2, 3)?;
        both_ports_click(&apply_circuit(&rho, &circuit)?, vec![0, 2], vec![1, 3])?
    };
    let l2 = overlap * overlap;
    Ok(l2 * same + (1.0 - l2) * orthogonal)
}

/// Coincidence probability per detection window, in units of the pair
/// emission probability, including double pairs at probability `p`. Two
/// pairs put two photons in each input; a coincidence is missed only when
/// both pairs route like a HOM-bunched single pair, which gives the
/// `1 + c` weight of the double-pair term.
pub fn hom_coincidence_probability(overlap: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!("emission probability {p} outside [0, 1]")));
    }
    let c = single_pair_coincidence(overlap)?;
    Ok(c + p * (1.0 + c))
}

/// Dip visibility between fully distinguishable photons and `overlap`.
pub fn hom_visibility_model(overlap: f64, p: f64) -> Result<f64> {
    let top = hom_coincidence_probability(0.0, p)?;
    Ok(1.0 - hom_coincidence_probability(overlap, p)? / top)
}

/// Overlap at which the model dip visibility equals `target`.
pub fn calibrate_overlap(p: f64, target: f64) -> Result<f64> {
    let (lo_v, hi_v) = (hom_visibility_model(0.0, p)?, hom_visibility_model(1.0, p)?);
    if !(target >= lo_v && target <= hi_v) {
        return Err(Error::arg(format!(
            "visibility {target} unreachable at p = {p} (range {lo_v}..{hi_v})"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if hom_visibility_model(mid, p)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomScan {
    pub overlaps: Vec<f64>,
    pub counts: Vec<f64>,
    pub expected: Vec<f64>,
    pub c_max: f64,
    pub c_min: f64,
    pub v_dip: f64,
    /// Visibility of the expected counts between the same grid points.
    pub v_model: f64,
    pub shots: u64,
    pub seed: u64,
    /// Too few counts at the top of the dip for a stable visibility.
    pub low_counts: bool,
}

impl HomScan {
    /// CSV-ready form with the overlap in the `phase_or_delay` column.
    pub fn to_scan(&self) -> Result<FringeScan> {
        let n = self.overlaps.len();
        FringeScan::with_columns(
            self.overlaps.clone(),
            self.counts.clone(),
            vec![0.0; n],
            vec![NOISE_OFF; n],
            ScanMetadata {
                label: "hom".into(),
                seed: Some(self.seed),
                ..ScanMetadata::default()
            },
        )
    }
}

/// Coincidence counts over `shots` detection windows for each overlap in
/// the grid. `C_max` and `C_min` are the counts at the smallest and largest
/// overlap.
pub fn hom_scan(source: &SourceModel, overlap_grid: &[f64], shots: u64, seed: u64) -> Result<HomScan> {
    source.validate()?;
    if overlap_grid.len() < 2 {
        return Err(Error::arg("HOM scan needs at least two overlap values"));
    }
    if overlap_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::arg("overlap grid must be strictly increasing"));
    }
    if shots == 0 {
        return Err(Error::arg("HOM scan needs at least one shot"));
    }
    let p = source.emission_prob;
    let expected = overlap_grid
        .iter()
        .map(|&l| Ok(shots as f64 * hom_coincidence_probability(l, p)?))
        .collect::<Result<Vec<f64>>>()?;
    let counts: Vec<f64> = expected
        .par_iter()
        .enumerate()
        .map(|(i, &mu)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(point_stream(ScanId::Hom, i));
            poisson(&mut rng, mu)
        })
        .collect();
    let (top, bottom) = (counts[0], counts[counts.len() - 1]);
    let v_dip = if top > 0.0 { (top - bottom) / top } else { 0.0 };
    let (et, eb) = (expected[0], expected[expected.len() - 1]);
    Ok(HomScan {
        overlaps: overlap_grid.to_vec(),
        c_max: top,
        c_min: bottom,
        v_dip,
        v_model: (et - eb) / et,
        low_counts: et < MIN_STABLE_COUNTS,
        counts,
        expected,
        shots,
        seed,
    })
}
