//! Command implementations behind the `d2nn` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod datasets;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
