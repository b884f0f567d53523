//! Batch front-end for the `rbsim` simulator: configuration, subcommands and
//! artifact writers. The binary in `main.rs` is a thin clap wrapper.

pub mod commands;
pub mod config;

use serde_json::json;

pub use config::Config;

/// Directory used when neither the flag, the config nor the environment names one.
pub const DEFAULT_OUT_DIR: &str = "rbsim-out";
pub const OUT_DIR_ENV: &str = "RBSIM_OUT_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] rbsim::Error),
    #[error("clifford audit failed for gate(s) {gates:?}; {inversion_failures} inversion failure(s)")]
    Audit { gates: Vec<usize>, inversion_failures: usize },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 2 for bad input, 3 for fit failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use rbsim::Error as E;
        match self {
            CliError::Schema { .. } | CliError::Usage(_) => 2,
            CliError::Sim(E::UnsupportedTarget { .. } | E::InvalidExperiment(_) | E::Domain(_)) => 2,
            CliError::Sim(E::InsufficientData(_)) => 2,
            CliError::Sim(E::FitFailure { .. }) => 3,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        use rbsim::Error as E;
        match self {
            CliError::Schema { .. } => "schema",
            CliError::Usage(_) => "usage",
            CliError::Sim(E::UnsupportedTarget { .. }) => "unsupported-target",
            CliError::Sim(E::FitFailure { .. }) => "fit-failure",
            CliError::Sim(E::InsufficientData(_)) => "insufficient-data",
            CliError::Sim(E::InvalidExperiment(_) | E::Domain(_)) => "invalid-input",
            CliError::Sim(_) => "simulation",
            CliError::Audit { .. } => "audit",
            CliError::Io(_) => "io",
        }
    }

    /// Machine-readable report written to stderr.
    pub fn report(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Schema { path, .. } => v["path"] = json!(path),
            CliError::Audit { gates, .. } => v["gates"] = json!(gates),
            _ => {}
        }
        v
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
