//! Seeded Monte-Carlo sweeps over transmit power, SINR target and receive
//! aperture, with CSV output and summary statistics.

pub mod check;
pub mod config;
pub mod summary;
pub mod sweep;

pub use config::{load_config, parse_config, ConfigError, LoadedConfig, SweepSpec, SweepVariable};
pub use summary::{format_table, summarize, CellSummary};
pub use sweep::{run_sweep, write_csv, RunOptions, SweepOutcome, TrialRow};
