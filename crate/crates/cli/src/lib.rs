//! Command-line front end: configuration, run orchestration and output files.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;
