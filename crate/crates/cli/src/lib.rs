//! Command-line driver for the pulse-atlas toolkit: config parsing, the run
//! manifest, plot scripts and the subcommand drivers.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod run;
