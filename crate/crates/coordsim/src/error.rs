use std::path::PathBuf;

use coordsim_core::osrb::OsrbError;
use coordsim_core::polytope::PolytopeError;
use coordsim_core::{ProbError, RegionError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Osrb(#[from] OsrbError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// Output could not be written.
    pub const IO: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const BUDGET: u8 = 3;
    pub const PARSE: u8 = 4;
}

impl Error {
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Read { .. } | Error::Json { .. } | Error::Parse(_) => exit::PARSE,
            Error::Write { .. } | Error::Csv(_) => exit::IO,
            Error::Osrb(OsrbError::Budget { .. }) => exit::BUDGET,
            Error::Osrb(_) | Error::Region(_) | Error::Polytope(_) | Error::Prob(_) | Error::Validation(_) => {
                exit::VALIDATION
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
