//! Library side of the `ngproxy` binary: configuration, execution and reports.

pub mod config;
pub mod report;
pub mod run;

use std::path::PathBuf;

use serde_json::json;

pub use config::{load_config, parse_config, ConfigError, Overrides, RunConfig};
pub use run::{execute, RunError};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Runtime(RunError),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    /// Single-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        let v = match self {
            Failure::Config(e) => json!({"error": "config", "messages": e.messages}),
            Failure::Runtime(e) => json!({"error": "runtime", "messages": [e.to_string()]}),
        };
        v.to_string()
    }
}

/// Loads the config (or an embedded preset), validates it and runs it.
pub fn run_with(config: Option<PathBuf>, overrides: &Overrides) -> Result<Vec<PathBuf>, Failure> {
    let cfg = match config {
        Some(p) => load_config(&p, overrides).map_err(Failure::Config)?,
        None => {
            let base = std::env::current_dir().unwrap_or_default();
            let text = default_config(overrides).map_err(Failure::Config)?;
            parse_config(text, &base, overrides).map_err(Failure::Config)?
        }
    };
    execute(&cfg).map_err(Failure::Runtime)
}

/// Built-in config used when no `--config` is given.
fn default_config(ov: &Overrides) -> Result<&'static str, ConfigError> {
    match ov.command {
        Some(config::Command::Simulate) => {
            let name = ov.preset.as_deref().unwrap_or("exogenous");
            preset_text(name).ok_or_else(|| ConfigError::one(format!("unknown preset `{name}`")))
        }
        Some(c) => Err(ConfigError::one(format!("`{}` needs --config", c.name()))),
        None => Err(ConfigError::one("no command given")),
    }
}

/// Checked-in simulation presets.
pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "exogenous" => Some(include_str!("../../../presets/exogenous.toml")),
        "weak" => Some(include_str!("../../../presets/weak.toml")),
        "weak-alt" => Some(include_str!("../../../presets/weak-alt.toml")),
        "endogenous" => Some(include_str!("../../../presets/endogenous.toml")),
        _ => None,
    }
}
