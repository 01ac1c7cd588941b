//! Command-line front end for the `nfpe` solver: configuration parsing and
//! the subcommands behind the `nfpe` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{Manifest, RateReport};
pub use config::{parse_config, ConfigError, RunConfig};
