//! Command pipelines behind the `duopoly` binary.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VERIFICATION: u8 = 4;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "DUOPOLY_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] duopoly_core::Error),
    #[error("spectrum verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use duopoly_core::Error as E;
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Config { .. } | CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Core(e) => match e {
                E::InvalidParameter { .. }
                | E::UnknownParameter(_)
                | E::InvalidRectangle(_)
                | E::Configuration(_)
                | E::Precondition(_) => EXIT_VALIDATION,
                E::RectangleTooSmall { .. } | E::WindingUnresolved { .. } | E::IncompleteSpectrum { .. } => {
                    EXIT_VERIFICATION
                }
                _ => EXIT_SOLVER,
            },
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("{THREADS_ENV}: {e}")))
}
