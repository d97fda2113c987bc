//! Command-line pipeline around `cliffbench-core`: activity CSV curation,
//! MMP tables, pair-aware splits, model training, evaluation and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod toy;

pub use error::{CliError, Result};
