//! Configuration, sweeps, rate fits, reports and verification.

pub mod config;
pub mod rate;
pub mod report;
pub mod sweep;
pub mod verify;

pub use config::{parse_config, RunConfig};
pub use rate::{fit_rate, RateFit};
pub use report::{emit_report, Format};
pub use sweep::{run_sweep, ConvergenceReport, ReportRow};
