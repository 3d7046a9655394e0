//! File formats, synthetic scenarios and command implementations for the
//! `parttrack` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod instances;
pub mod io;
pub mod synth;

pub use error::{HarnessError, Result};
