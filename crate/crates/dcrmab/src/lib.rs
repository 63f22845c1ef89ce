//! Experiment runner for the data-center demand-response bandit simulator:
//! config files, trace ingestion, result artifacts, reports and sweeps.

pub mod check;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod report;
pub mod runner;
pub mod sweep;
pub mod trace;

pub use config::RunConfig;
pub use error::{Error, Result};
