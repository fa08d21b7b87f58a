//! Results CSV schema, reading, and atomic file writes.

use std::io::Write;
use std::path::Path;

use cim_core::analysis::Detector;
use cim_core::modem::Scheme;
use cim_core::sim::BerCurve;
use serde::Deserialize;

use crate::config::ResolvedExperiment;
use crate::error::CliError;

/// Bumped whenever the column set or formatting changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 16] = [
    "experiment",
    "scheme",
    "detector",
    "Nt",
    "Nr",
    "Nc",
    "M",
    "snr_db",
    "ber",
    "ber_sci",
    "ci95",
    "bits_simulated",
    "source",
    "seed",
    "spec_digest",
    "schema_version",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Sim,
    Analytic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Sim => "sim",
            Source::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub experiment: String,
    pub scheme: Scheme,
    pub detector: Detector,
    pub nt: usize,
    pub nr: usize,
    pub nc: usize,
    pub m: usize,
    pub snr_db: f64,
    pub ber: f64,
    /// Absent for analytic rows.
    pub ci95: Option<f64>,
    pub bits_simulated: Option<u64>,
    pub source: Source,
    pub seed: u64,
    pub spec_digest: String,
}

/// 17 significant digits, enough to round-trip any `f64`.
fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

impl ResultsRow {
    fn record(&self) -> [String; 16] {
        [
            self.experiment.clone(),
            self.scheme.as_str().to_string(),
            self.detector.as_str().to_string(),
            self.nt.to_string(),
            self.nr.to_string(),
            self.nc.to_string(),
            self.m.to_string(),
            exact(self.snr_db),
            exact(self.ber),
            format!("{:.3e}", self.ber),
            self.ci95.map(exact).unwrap_or_default(),
            self.bits_simulated.map(|b| b.to_string()).unwrap_or_default(),
            self.source.as_str().to_string(),
            self.seed.to_string(),
            self.spec_digest.clone(),
            SCHEMA_VERSION.to_string(),
        ]
    }
}

/// The detector the closed-form ABEP describes for each scheme.
pub fn analytic_detector(scheme: Scheme) -> Detector {
    match scheme {
        Scheme::SmCim | Scheme::StbcSmCim => Detector::Lc,
        Scheme::EstbcSmCim => Detector::Ml,
    }
}

/// Simulated rows for every curve, then analytic rows when requested and available.
pub fn experiment_rows(exp: &ResolvedExperiment, curves: &[BerCurve]) -> Vec<ResultsRow> {
    let e = &exp.entry;
    let row = |detector, snr_db, ber, ci95, bits, source, digest: &str| ResultsRow {
        experiment: e.name.clone(),
        scheme: e.scheme,
        detector,
        nt: e.nt,
        nr: e.nr,
        nc: e.nc,
        m: e.m,
        snr_db,
        ber,
        ci95,
        bits_simulated: bits,
        source,
        seed: exp.spec.master_seed,
        spec_digest: digest.to_string(),
    };
    let mut rows = Vec::new();
    for c in curves {
        for p in &c.points {
            rows.push(row(
                c.detector,
                p.snr_db,
                p.ber,
                Some(p.ci95_halfwidth),
                Some(p.bits_simulated),
                Source::Sim,
                &c.spec_digest,
            ));
        }
    }
    if e.analytic {
        if let Some(first) = curves.first() {
            if let Some(points) = &first.analytic_points {
                for a in points {
                    rows.push(row(
                        analytic_detector(e.scheme),
                        a.snr_db,
                        a.pb,
                        None,
                        None,
                        Source::Analytic,
                        &first.spec_digest,
                    ));
                }
            }
        }
    }
    rows
}

pub fn rows_to_csv(rows: &[ResultsRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

/// The columns `gap` needs from a results file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CurveRecord {
    pub experiment: String,
    pub detector: String,
    pub snr_db: f64,
    pub ber: f64,
    pub source: String,
}

pub fn read_curve_records(path: &Path) -> Result<Vec<CurveRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<CurveRecord>, _>>()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes via a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}
