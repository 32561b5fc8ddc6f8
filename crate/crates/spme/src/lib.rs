//! Experiment runner for `spme-core`: JSON configs, CSV reports, run
//! manifests, parallel ensembles and the `spme` command line.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csv;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod manifest;

pub use config::{Experiment, ExperimentConfig};
pub use error::{ConfigError, RunError};
