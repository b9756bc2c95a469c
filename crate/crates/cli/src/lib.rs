//! Configuration, persistence and orchestration for the `paraburgers` command-line tool.

pub mod commands;
pub mod config;
pub mod output;
pub mod snapshot;
pub mod suites;
