use thiserror::Error;

use crate::config::ConfigError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A core error caused by the configured values rather than the computation.
    #[error("{0}")]
    InvalidInput(absorb_core::Error),
    #[error("{0}")]
    Numerical(absorb_core::Error),
    /// A post-run consistency check failed before any file was written.
    #[error("{module}: {message}")]
    Check { module: &'static str, message: String },
    #[error("io: {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("verify: {failed} invariant(s) failed")]
    VerifyFailed { failed: usize },
    #[error("cli: {0}")]
    Usage(String),
}

impl From<absorb_core::Error> for CliError {
    fn from(e: absorb_core::Error) -> Self {
        use absorb_core::Error as E;
        match e {
            E::BadGeometry(_)
            | E::InconsistentSpacing { .. }
            | E::BadPacket(_)
            | E::NonFiniteValue { .. }
            | E::SizeMismatch { .. }
            | E::BadBeta { .. }
            | E::Unsupported(_)
            | E::InvalidTimeStep(_)
            | E::NotContraction { .. }
            | E::TooLarge { .. }
            | E::EtaTooClose { .. } => CliError::InvalidInput(e),
            _ => CliError::Numerical(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::InvalidInput(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::VerifyFailed { .. } => EXIT_VERIFY_FAILED,
            CliError::Numerical(_) | CliError::Check { .. } | CliError::Io { .. } => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
