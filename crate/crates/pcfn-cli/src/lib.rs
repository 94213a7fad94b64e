//! Library surface of the command-line driver, so integration tests can run
//! commands in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod rundir;
