//! Plot-ready CSV tables and configuration digests.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::HistogramBin;
use crate::error::Result;
use crate::protocol::{RepeaterTrajectory, SweepRow};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the compact JSON form of `value`.
pub fn config_digest<S: Serialize>(value: &S) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

#[derive(Serialize)]
struct SweepLine {
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "F_tilde")]
    f_tilde: f64,
    p_success: f64,
}

/// Columns `T,F_tilde,p_success`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(SweepLine {
            t: r.transmittance,
            f_tilde: r.purified_fidelity,
            p_success: r.success_probability,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LevelLine {
    level: usize,
    epsilon: f64,
}

/// Columns `level,epsilon`.
pub fn write_repeater_csv<W: Write>(trajectory: &RepeaterTrajectory<f64>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (level, &epsilon) in trajectory.epsilon.iter().enumerate() {
        w.serialize(LevelLine { level, epsilon })?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `bin_center,density,gaussian`.
pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for b in bins {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}
