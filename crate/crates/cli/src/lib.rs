//! Command-line driver: configuration, orchestration and file output.

pub mod commands;
pub mod config;
pub mod output;
