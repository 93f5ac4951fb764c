//! Standard-library companion of `cuwalk-core`: JSON and CSV formats, a
//! rayon trial runner and the `cuwalk` command-line tool.
//!
//! All numerics live in the core crate; this crate only moves data in and
//! out and spreads independent Monte-Carlo trials over threads without
//! changing any result.

pub mod cli;
pub mod csv;
pub mod error;
pub mod format;
pub mod parallel;

pub use cuwalk_core as core;
pub use error::CliError;
