//! Library side of the `blockprec` command-line driver: configuration
//! loading with dotted-path overrides, solve runs and report files.

pub mod config;
pub mod report;
pub mod run;
