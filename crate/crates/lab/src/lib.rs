//! Laboratory front end for `lsa-core`: JSON problem specs, parallel
//! Monte Carlo, CSV/SVG output and the subcommands behind the `lsa-lab`
//! binary.

pub mod cli;
pub mod commands;
pub mod output;
pub mod parallel;
pub mod spec;
pub mod svg;

use std::path::Path;

use lsa_core::LsaError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] LsaError),
    #[error("{0}")]
    Spec(String),
    #[error("{0}")]
    Io(String),
    #[error("all {0} replications diverged")]
    Diverged(usize),
}

impl LabError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        LabError::Io(format!("{}: {e}", path.display()))
    }

    /// 3 for divergence without a usable result, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Diverged(_) => 3,
            _ => 2,
        }
    }
}
