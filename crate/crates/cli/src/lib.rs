//! Command-line driver for the tactile compressed sensing toolkit: config
//! handling, file formats, and the benchmark harness behind each verb.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, Result};
