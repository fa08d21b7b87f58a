use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cim_core::analysis::{complexity_table, energy_table, rate_table, ComplexityParams};
use cim_core::sim::{gap_db, run_sweep, RunOptions};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_config, ResolvedExperiment};
use crate::error::CliError;
use crate::output::{experiment_rows, read_curve_records, rows_to_csv, write_atomic, SCHEMA_VERSION};

fn config_dir(config: &Path) -> PathBuf {
    config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Parses and validates a config without running it.
pub fn validate(config: &Path) -> Result<Vec<ResolvedExperiment>, CliError> {
    load_config(config)?.resolve(&config_dir(config), None)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub output: PathBuf,
    pub spec_digest: String,
    pub seed: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiments: Vec<ExperimentSummary>,
    pub manifest: PathBuf,
}

/// Runs every experiment, then writes all CSVs and `manifest.json`.
pub fn run(config: &Path, out_dir: &Path, workers: usize, seed: Option<u64>) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let experiments = load_config(config)?.resolve(&config_dir(config), seed)?;
    let opts = RunOptions {
        workers,
        stream_digest: false,
    };
    let mut files = Vec::with_capacity(experiments.len());
    let mut summaries = Vec::with_capacity(experiments.len());
    for exp in &experiments {
        let curves = run_sweep(&exp.spec, &opts)?;
        let rows = experiment_rows(exp, &curves);
        files.push((out_dir.join(&exp.output), rows_to_csv(&rows)?));
        summaries.push(ExperimentSummary {
            name: exp.entry.name.clone(),
            output: exp.output.clone(),
            spec_digest: exp.spec.digest(),
            seed: exp.spec.master_seed,
            rows: rows.len(),
        });
    }
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "cimsim",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "workers": workers,
        "seed_override": seed,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "experiments": summaries,
    });
    let manifest_path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(&manifest_path, text.as_bytes())?;
    Ok(RunSummary {
        experiments: summaries,
        manifest: manifest_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Rate,
    Energy,
    Complexity,
}

impl TableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TableKind::Rate => "rate",
            TableKind::Energy => "energy",
            TableKind::Complexity => "complexity",
        }
    }
}

/// A rendered table: aligned text for the terminal and CSV for files.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: Vec<u8>,
}

fn render(header: &[&str], rows: &[Vec<String>]) -> Result<RenderedTable, CliError> {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for line in std::iter::once(header.iter().map(|s| s.to_string()).collect::<Vec<_>>()).chain(rows.iter().cloned()) {
        let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(text, "{}", cells.join("  ").trim_end());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let csv = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(RenderedTable { text, csv })
}

pub fn table(kind: TableKind, params: ComplexityParams) -> Result<RenderedTable, CliError> {
    match kind {
        TableKind::Rate => {
            let rows: Vec<Vec<String>> = rate_table()?
                .iter()
                .map(|r| {
                    vec![
                        r.num_tx.to_string(),
                        r.num_codes.to_string(),
                        r.modulation_order.to_string(),
                        r.sm_cim.to_string(),
                        r.stbc_sm_cim.to_string(),
                        r.estbc_sm_cim.to_string(),
                    ]
                })
                .collect();
            render(&["Nt", "Nc", "M", "SM-CIM", "STBC-SM-CIM", "ESTBC-SM-CIM"], &rows)
        }
        TableKind::Energy => {
            let rows: Vec<Vec<String>> = energy_table()?
                .iter()
                .map(|r| {
                    vec![
                        r.num_tx.to_string(),
                        r.num_codes.to_string(),
                        r.modulation_order.to_string(),
                        r.bits_per_interval.to_string(),
                        format!("{:.2}", r.sm_cim),
                        format!("{:.2}", r.stbc_sm_cim),
                        format!("{:.2}", r.estbc_sm_cim),
                    ]
                })
                .collect();
            render(&["Nt", "Nc", "M", "bt", "SM-CIM %", "STBC-SM-CIM %", "ESTBC-SM-CIM %"], &rows)
        }
        TableKind::Complexity => {
            let rows: Vec<Vec<String>> = complexity_table(params)?
                .iter()
                .map(|r| {
                    vec![
                        r.scheme.as_str().to_string(),
                        r.ml_formula.to_string(),
                        r.ml_count.map(|c| c.to_string()).unwrap_or_else(|| "n/a".to_string()),
                        r.lc_formula.to_string(),
                        r.lc_count.to_string(),
                    ]
                })
                .collect();
            render(&["scheme", "ML formula", "ML count", "LC formula", "LC count"], &rows)
        }
    }
}

/// Picks one simulated curve out of a results file.
fn select_curve(path: &Path, detector: Option<&str>, experiment: Option<&str>) -> Result<Vec<(f64, f64)>, CliError> {
    let records = read_curve_records(path)?;
    let sim: Vec<_> = records
        .into_iter()
        .filter(|r| r.source == "sim")
        .filter(|r| detector.is_none_or(|d| r.detector == d))
        .filter(|r| experiment.is_none_or(|e| r.experiment == e))
        .collect();
    let mut keys: Vec<(&str, &str)> = sim.iter().map(|r| (r.experiment.as_str(), r.detector.as_str())).collect();
    keys.sort();
    keys.dedup();
    match keys.len() {
        0 => Err(CliError::Runtime(format!("{}: no matching simulated curve", path.display()))),
        1 => Ok(sim.iter().map(|r| (r.snr_db, r.ber)).collect()),
        _ => Err(CliError::Runtime(format!(
            "{}: several curves match ({keys:?}); pick one with --detector/--experiment",
            path.display()
        ))),
    }
}

#[derive(Debug, Clone, Default)]
pub struct CurveSelector {
    pub detector: Option<String>,
    pub experiment: Option<String>,
}

/// `snr_B - snr_A` at `level`; positive when curve A needs less SNR.
pub fn gap(a: &Path, b: &Path, level: f64, sel_a: &CurveSelector, sel_b: &CurveSelector) -> Result<f64, CliError> {
    let ca = select_curve(a, sel_a.detector.as_deref(), sel_a.experiment.as_deref())?;
    let cb = select_curve(b, sel_b.detector.as_deref(), sel_b.experiment.as_deref())?;
    Ok(gap_db(&ca, &cb, level)?)
}
