//! Batch front-end for `pimc-core`: configuration, sweeps, kernel commands and
//! CSV/JSON output.

pub mod app;
pub mod config;
pub mod error;
pub mod kernels_cmd;
pub mod output;
pub mod run;
