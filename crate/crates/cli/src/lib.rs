//! Command-line front end: configuration, subcommands and sweep aggregation.

pub mod commands;
pub mod config;
pub mod models;
pub mod sweep;

pub use config::RunConfig;
pub use sweep::{aggregate, plot_data, sweep, CellSummary, RunRow, SweepReport};

/// Invalid command-line input or configuration file.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Exit code for a failed command: configuration problems map to 2, everything else to 3.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<toml::de::Error>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<duetsep::Error>() {
            return if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME };
        }
    }
    EXIT_RUNTIME
}
