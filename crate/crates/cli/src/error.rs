use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Engine(#[from] randloop::Error),

    #[error("chain {chain}: {source}")]
    Chain { chain: u64, source: randloop::Error },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

impl CliError {
    /// 0 success, 1 usage (and I/O), 2 validation, 3 numeric-target failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Csv { .. } => 1,
            CliError::Config(_) | CliError::Validation(_) | CliError::Json { .. } => 2,
            CliError::Engine(e) | CliError::Chain { source: e, .. } => engine_code(e),
        }
    }
}

fn engine_code(e: &randloop::Error) -> i32 {
    use randloop::Error as E;
    match e {
        E::QuadratureTarget { .. } | E::Invariant { .. } | E::NotHermitian(_) | E::Inconclusive(_) | E::Undefined(_) => 3,
        _ => 2,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

pub fn json_err(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Json { path, source }
}
