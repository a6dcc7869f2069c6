//! Experiment runner and artifact verifier for `qcharge-core`.
//!
//! A run reads one JSON config, writes CSV/JSON artifacts plus a
//! `manifest.json`, and `verify` re-checks a finished run using only the
//! files its manifest lists.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod format;
pub mod run;
pub mod verify;

pub use config::{parse_config, ExperimentConfig};
pub use error::RunError;
pub use run::{run, Manifest};
pub use verify::{verify, VerifyReport};
