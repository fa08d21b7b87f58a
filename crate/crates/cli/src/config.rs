//! Experiment files.
//!
//! ```toml
//! [[experiments]]
//! name = "sm_cim_2422"
//! scheme = "sm_cim"
//! nt = 2
//! nr = 4
//! nc = 2
//! m = 2
//! snr_grid_db = [0.0, 2.0, 4.0]
//! detector = "both"
//!
//! [experiments.codebook]
//! family = "cyclic_chirp"
//! spreading_factor = 2
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cim_core::channel::ChannelConfig;
use cim_core::codebook::{gen_cyclic_chirp, gen_zadoff_chu, load_codebook, SpreadingCodebook};
use cim_core::modem::{Scheme, SchemeConfig};
use cim_core::sim::{DetectorMode, ExperimentSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub experiments: Vec<ExperimentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub name: String,
    /// CSV path relative to the output directory; defaults to `<name>.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Emit analytic rows when the closed-form model covers the configuration.
    #[serde(default = "default_true")]
    pub analytic: bool,
    pub scheme: Scheme,
    pub nt: usize,
    pub nr: usize,
    pub nc: usize,
    pub m: usize,
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_max_blocks")]
    pub max_blocks: u64,
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_detector")]
    pub detector: DetectorMode,
    #[serde(default = "default_ts")]
    pub symbol_duration_ts: f64,
    pub codebook: CodebookSource,
    #[serde(default)]
    pub channel: ChannelSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodebookSource {
    ZadoffChu {
        length: usize,
        /// Defaults to the first `nc` roots coprime with `length`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        roots: Option<Vec<u64>>,
    },
    CyclicChirp {
        spreading_factor: u32,
        #[serde(default = "default_oversampling")]
        oversampling: usize,
    },
    /// Text codebook file, relative to the config file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default)]
    pub corr_r: f64,
    #[serde(default)]
    pub csi_error_var: f64,
}

fn default_true() -> bool {
    true
}

fn default_max_blocks() -> u64 {
    1_000_000
}

fn default_target_errors() -> u64 {
    500
}

fn default_detector() -> DetectorMode {
    DetectorMode::Lc
}

fn default_ts() -> f64 {
    1.0
}

fn default_oversampling() -> usize {
    1
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub entry: ExperimentEntry,
    pub spec: ExperimentSpec,
    pub output: PathBuf,
}

/// Parses TOML, reporting type errors with their field path.
pub fn parse_config(text: &str) -> Result<ExperimentFile, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "<root>".to_string() } else { field };
        CliError::config(field, e.into_inner().message().to_string())
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn first_coprime_roots(length: usize, count: usize) -> Vec<u64> {
    fn gcd(mut a: u64, mut b: u64) -> u64 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    (1..length as u64).filter(|&u| gcd(u, length as u64) == 1).take(count).collect()
}

fn scheme_error_field(message: &str) -> &'static str {
    if message.contains("Nr") {
        "nr"
    } else if message.contains("Nc") || message.contains("Ns") {
        "nc"
    } else if message.contains("Nt") || message.contains("Nz") {
        "nt"
    } else if message.contains('M') {
        "m"
    } else {
        "scheme"
    }
}

impl ExperimentEntry {
    fn codebook(&self, at: &str, base_dir: &Path) -> Result<SpreadingCodebook, CliError> {
        let field = format!("{at}.codebook");
        let cb = match &self.codebook {
            CodebookSource::ZadoffChu { length, roots } => {
                let roots = roots.clone().unwrap_or_else(|| first_coprime_roots(*length, self.nc));
                gen_zadoff_chu(*length, &roots)
            }
            CodebookSource::CyclicChirp {
                spreading_factor,
                oversampling,
            } => gen_cyclic_chirp(*spreading_factor, *oversampling, self.nc),
            CodebookSource::File { path } => {
                let full = base_dir.join(path);
                if !full.is_file() {
                    return Err(CliError::MissingCodebook {
                        field: format!("{field}.path"),
                        path: full,
                    });
                }
                load_codebook(&full)
            }
        }
        .map_err(|e| CliError::config(field.clone(), e.to_string()))?;
        if cb.count() != self.nc {
            return Err(CliError::config(
                format!("{at}.nc"),
                format!("nc = {} but the codebook has {} sequences", self.nc, cb.count()),
            ));
        }
        Ok(cb)
    }

    /// Builds the simulation spec. `at` is the entry's field path.
    pub fn resolve(&self, at: &str, base_dir: &Path) -> Result<ExperimentSpec, CliError> {
        if self.name.trim().is_empty() {
            return Err(CliError::config(format!("{at}.name"), "name must not be empty"));
        }
        let cb = Arc::new(self.codebook(at, base_dir)?);
        let config = SchemeConfig::new(self.scheme, self.nt, self.nr, self.m, cb).map_err(|e| {
            let msg = e.to_string();
            CliError::config(format!("{at}.{}", scheme_error_field(&msg)), msg)
        })?;
        let spec = ExperimentSpec {
            scheme: config,
            channel: ChannelConfig {
                num_rx: self.nr,
                num_tx: self.nt,
                corr_r: self.channel.corr_r,
                csi_error_var: self.channel.csi_error_var,
            },
            snr_grid_db: self.snr_grid_db.clone(),
            max_blocks: self.max_blocks,
            target_errors: self.target_errors,
            master_seed: self.seed,
            detector: self.detector,
            symbol_duration: self.symbol_duration_ts,
        };
        spec.validate().map_err(|e| match e {
            cim_core::Error::InvalidField { field, reason } => CliError::config(format!("{at}.{field}"), reason),
            other => CliError::config(at.to_string(), other.to_string()),
        })?;
        Ok(spec)
    }

    pub fn output_path(&self) -> PathBuf {
        PathBuf::from(self.output.clone().unwrap_or_else(|| format!("{}.csv", self.name)))
    }
}

impl ExperimentFile {
    /// Validates every entry; `base_dir` resolves codebook files.
    pub fn resolve(&self, base_dir: &Path, seed_override: Option<u64>) -> Result<Vec<ResolvedExperiment>, CliError> {
        if self.experiments.is_empty() {
            return Err(CliError::config("experiments", "no experiments defined"));
        }
        let mut names = HashSet::new();
        let mut outputs = HashSet::new();
        let mut resolved = Vec::with_capacity(self.experiments.len());
        for (i, entry) in self.experiments.iter().enumerate() {
            let at = format!("experiments[{i}]");
            if !names.insert(entry.name.as_str()) {
                return Err(CliError::config(format!("{at}.name"), format!("duplicate name `{}`", entry.name)));
            }
            let output = entry.output_path();
            if output.is_absolute() || output.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
                return Err(CliError::config(
                    format!("{at}.output"),
                    "output must be a relative path inside the output directory",
                ));
            }
            if !outputs.insert(output.clone()) {
                return Err(CliError::config(
                    format!("{at}.output"),
                    format!("duplicate output `{}`", output.display()),
                ));
            }
            let mut entry = entry.clone();
            if let Some(seed) = seed_override {
                entry.seed = seed;
            }
            let spec = entry.resolve(&at, base_dir)?;
            resolved.push(ResolvedExperiment { entry, spec, output });
        }
        Ok(resolved)
    }
}
