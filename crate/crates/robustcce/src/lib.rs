//! File formats, experiment configs and the command-line runner for
//! `robustcce-core`.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod gamefile;
pub mod output;
pub mod verify;
