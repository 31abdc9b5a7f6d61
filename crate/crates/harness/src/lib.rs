//! Acceptance suites, statistical tests and report plumbing for the
//! `collapse` command-line tool.

pub mod error;
pub mod ks;
pub mod report;
pub mod suite;
pub mod tolerances;

pub use error::{HarnessError, Result};
pub use ks::ks_two_sample;
pub use suite::{run_suite, CheckResult, SuiteConfig, SuiteReport, SUITES};
