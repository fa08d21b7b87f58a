use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("invalid config at `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Exit code 3.
    #[error("codebook file not found: {}", path.display())]
    MissingCodebook { field: String, path: PathBuf },

    /// Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::MissingCodebook { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }

    /// Machine-readable report written to stderr.
    pub fn report(&self) -> serde_json::Value {
        let (kind, field) = match self {
            CliError::Config { field, .. } => ("invalid_config", Some(field.as_str())),
            CliError::MissingCodebook { field, .. } => ("missing_codebook", Some(field.as_str())),
            CliError::Runtime(_) => ("runtime", None),
        };
        json!({
            "status": "error",
            "kind": kind,
            "exit_code": self.exit_code(),
            "field": field,
            "message": self.to_string(),
        })
    }
}

impl From<cim_core::Error> for CliError {
    fn from(e: cim_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
