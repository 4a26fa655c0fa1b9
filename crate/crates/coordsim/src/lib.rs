//! File formats, parallel runners and the command line for `coordsim-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
