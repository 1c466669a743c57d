//! Command implementations behind the `gplsi` binary.

pub mod commands;
pub mod manifest;

use std::path::{Path, PathBuf};

use gplsi_core::GplsiError;

pub use commands::{run, Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] GplsiError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
    #[error("could not set up the thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("manifest check failed for {0:?}")]
    ManifestMismatch(Vec<PathBuf>),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 1,
            CliError::ThreadPool(_) => 1,
            _ => EXIT_INPUT,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

/// What a successful command reports back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// Outputs were written but some solver hit its iteration cap.
    NonConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Done => EXIT_OK,
            Outcome::NonConverged => EXIT_NONCONVERGED,
        }
    }
}
