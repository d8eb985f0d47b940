//! Scenario-driven front end: profile tabulation, strip solves,
//! verification suites, sweeps and markdown reports.

pub mod checks;
pub mod error;
pub mod report;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use error::{CliError, Result};
pub use scenario::Scenario;
