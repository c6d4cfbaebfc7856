//! Serialization of energy reports.
//!
//! JSON is the full `EnergyReport`. CSV carries one flat row per report with
//! the columns in [`CSV_COLUMNS`]; floats are written with 17 significant
//! digits so that every value parses back bit-for-bit. An unset `m_max`
//! (automatic cutoff) is an empty field.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reflection::KernelKind;
use crate::solver::EnergyReport;

pub const CSV_COLUMNS: [&str; 17] = [
    "aspect_ratio",
    "radius",
    "gap",
    "kernel",
    "energy",
    "e_pfa",
    "ratio_to_pfa",
    "n_radial",
    "radial_scale",
    "n_azimuthal",
    "n_xi",
    "xi_scale",
    "m_max",
    "m_max_used",
    "m_tail",
    "aliasing",
    "xi_tail",
];

/// The CSV view of an [`EnergyReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub aspect_ratio: f64,
    pub radius: f64,
    pub gap: f64,
    pub kernel: KernelKind,
    pub energy: f64,
    pub e_pfa: f64,
    pub ratio_to_pfa: f64,
    pub n_radial: usize,
    pub radial_scale: f64,
    pub n_azimuthal: usize,
    pub n_xi: usize,
    pub xi_scale: f64,
    pub m_max: Option<usize>,
    pub m_max_used: usize,
    pub m_tail: f64,
    pub aliasing: f64,
    pub xi_tail: f64,
}

impl From<&EnergyReport> for CsvRow {
    fn from(r: &EnergyReport) -> Self {
        Self {
            aspect_ratio: r.geometry.aspect_ratio,
            radius: r.geometry.radius,
            gap: r.geometry.gap,
            kernel: r.kernel,
            energy: r.energy,
            e_pfa: r.e_pfa,
            ratio_to_pfa: r.ratio_to_pfa,
            n_radial: r.config.n_radial,
            radial_scale: r.config.radial_scale,
            n_azimuthal: r.config.n_azimuthal,
            n_xi: r.config.n_xi,
            xi_scale: r.config.xi_scale,
            m_max: r.config.m_max,
            m_max_used: r.convergence.m_max_used,
            m_tail: r.convergence.m_tail,
            aliasing: r.convergence.aliasing,
            xi_tail: r.convergence.xi_tail,
        }
    }
}

fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl CsvRow {
    fn record(&self) -> [String; 17] {
        [
            float(self.aspect_ratio),
            float(self.radius),
            float(self.gap),
            self.kernel.to_string(),
            float(self.energy),
            float(self.e_pfa),
            float(self.ratio_to_pfa),
            self.n_radial.to_string(),
            float(self.radial_scale),
            self.n_azimuthal.to_string(),
            self.n_xi.to_string(),
            float(self.xi_scale),
            self.m_max.map(|m| m.to_string()).unwrap_or_default(),
            self.m_max_used.to_string(),
            float(self.m_tail),
            float(self.aliasing),
            float(self.xi_tail),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_COLUMNS.len() {
            return Err(Error::Io(format!(
                "expected {} fields, got {}",
                CSV_COLUMNS.len(),
                rec.len()
            )));
        }
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| Error::Io(format!("column {}: {e}", CSV_COLUMNS[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|e| Error::Io(format!("column {}: {e}", CSV_COLUMNS[i])))
        };
        Ok(Self {
            aspect_ratio: f(0)?,
            radius: f(1)?,
            gap: f(2)?,
            kernel: rec[3].parse()?,
            energy: f(4)?,
            e_pfa: f(5)?,
            ratio_to_pfa: f(6)?,
            n_radial: u(7)?,
            radial_scale: f(8)?,
            n_azimuthal: u(9)?,
            n_xi: u(10)?,
            xi_scale: f(11)?,
            m_max: if rec[12].is_empty() {
                None
            } else {
                Some(u(12)?)
            },
            m_max_used: u(13)?,
            m_tail: f(14)?,
            aliasing: f(15)?,
            xi_tail: f(16)?,
        })
    }
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Header plus one line per row.
pub fn emit_csv<W: Write>(rows: &[CsvRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn emit_reports_csv<W: Write>(reports: &[EnergyReport], out: W) -> Result<()> {
    let rows: Vec<CsvRow> = reports.iter().map(CsvRow::from).collect();
    emit_csv(&rows, out)
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io)?;
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Io(format!("unexpected CSV header {header:?}")));
    }
    r.records()
        .map(|rec| CsvRow::parse(&rec.map_err(io)?))
        .collect()
}

/// Pretty JSON. Field order follows the struct definitions and floats use
/// the shortest round-trip form, so equal values give identical bytes.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(io)
}
