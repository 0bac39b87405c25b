//! Phase-scan records shared by the experiment and analysis layers, and
//! their CSV form.

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regime flag of a scan point.
pub const NOISE_OFF: u8 = 0;
pub const NOISE_ON: u8 = 1;

/// Acquisition metadata. Not part of the CSV form; a scan read back from
/// CSV carries [`ScanMetadata::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub label: String,
    /// Integration time per point, seconds.
    pub exposure_s: f64,
    pub accidental_rate_hz: f64,
    pub accidentals_subtracted: bool,
    pub seed: Option<u64>,
    /// Index of the first point of the noise-on regime, if the scan has one.
    pub transition_index: Option<usize>,
}

impl Default for ScanMetadata {
    fn default() -> Self {
        Self {
            label: String::new(),
            exposure_s: 1.0,
            accidental_rate_hz: 0.0,
            accidentals_subtracted: false,
            seed: None,
            transition_index: None,
        }
    }
}

/// Coincidence counts against the scanned phase (or, for HOM scans, the
/// overlap or delay).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub phases: Vec<f64>,
    pub counts: Vec<f64>,
    /// Expected accidental coincidences per point.
    pub accidentals: Vec<f64>,
    pub regime: Vec<u8>,
    pub meta: ScanMetadata,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    phase_or_delay: f64,
    counts: f64,
    accidentals: f64,
    regime_flag: u8,
}

impl FringeScan {
    /// Scan without accidentals, all in the noise-off regime.
    pub fn new(phases: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        let n = phases.len();
        Self::with_columns(phases, counts, vec![0.0; n], vec![NOISE_OFF; n], ScanMetadata::default())
    }

    pub fn with_columns(
        phases: Vec<f64>,
        counts: Vec<f64>,
        accidentals: Vec<f64>,
        regime: Vec<u8>,
        meta: ScanMetadata,
    ) -> Result<Self> {
        let scan = Self {
            phases,
            counts,
            accidentals,
            regime,
            meta,
        };
        scan.validate()?;
        Ok(scan)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.phases.len();
        if n == 0 {
            return Err(Error::arg("scan has no points"));
        }
        if self.counts.len() != n || self.accidentals.len() != n || self.regime.len() != n {
            return Err(Error::arg("scan columns differ in length"));
        }
        if self.phases.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::arg("scan grid is not strictly increasing"));
        }
        if self.counts.iter().chain(&self.accidentals).any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::arg("scan counts must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Maximal runs of equal regime flag, in order.
    pub fn regime_segments(&self) -> Vec<(u8, Range<usize>)> {
        let mut out: Vec<(u8, Range<usize>)> = Vec::new();
        for (i, &r) in self.regime.iter().enumerate() {
            match out.last_mut() {
                Some((flag, range)) if *flag == r => range.end = i + 1,
                _ => out.push((r, i..i + 1)),
            }
        }
        out
    }

    pub fn slice(&self, range: Range<usize>) -> FringeScan {
        FringeScan {
            phases: self.phases[range.clone()].to_vec(),
            counts: self.counts[range.clone()].to_vec(),
            accidentals: self.accidentals[range.clone()].to_vec(),
            regime: self.regime[range].to_vec(),
            meta: ScanMetadata {
                transition_index: None,
                ..self.meta.clone()
            },
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for i in 0..self.len() {
            w.serialize(Row {
                phase_or_delay: self.phases[i],
                counts: self.counts[i],
                accidentals: self.accidentals[i],
                regime_flag: self.regime[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV form. The regime transition is recovered from the
    /// flags.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["phase_or_delay", "counts", "accidentals", "regime_flag"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::Configuration(format!(
                "scan CSV header must be {}, found {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut phases, mut counts, mut acc, mut regime) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: Row = row?;
            phases.push(row.phase_or_delay);
            counts.push(row.counts);
            acc.push(row.accidentals);
            regime.push(row.regime_flag);
        }
        let transition_index = regime.iter().position(|&r| r == NOISE_ON).filter(|&i| i > 0);
        Self::with_columns(
            phases,
            counts,
            acc,
            regime,
            ScanMetadata {
                transition_index,
                ..ScanMetadata::default()
            },
        )
    }
}
