//! Experiment harness for `sgda-core`: key/value configs, seeded sweeps on a
//! worker pool, per-trial and summary CSVs, SVG plots, certificate reports,
//! DIMACS input and kernel diagnostics. The `sgda` binary wraps these.

pub mod certify;
pub mod config;
pub mod dimacs;
mod error;
pub mod experiment;
pub mod kernel_check;
pub mod output;
pub mod plot;

pub use error::{HarnessError, Result};
