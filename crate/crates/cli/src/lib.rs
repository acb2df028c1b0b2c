//! Verification sweeps over grids of deformation parameters and spectra,
//! with JSON and CSV reports.

pub mod config;
pub mod error;
pub mod report;
pub mod suites;

pub use config::{SampleCounts, SweepConfig};
pub use error::CliError;
pub use report::{emit, parse_json, Comparison, Format, Parameters, VerificationReport};
pub use suites::{run_suite, run_suite_timed, Suite};
