use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EscError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EscError {
    #[error("integration diverged at t = {time} s: state component {component} is not finite")]
    IntegrationDiverged { time: f64, component: usize },

    #[error("kinematic singularity at t = {time} s: pitch {pitch} rad is within the guard margin of ±π/2")]
    KinematicSingularity { time: f64, pitch: f64 },

    #[error("state corruption: {0}")]
    StateCorruption(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("high-pass filter gain is required for the filtered adaptation law")]
    MissingHpfGain,

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("unknown application `{0}`")]
    UnknownApplication(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EscError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        EscError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EscError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stamps a time onto errors raised by time-agnostic plant code.
    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            EscError::KinematicSingularity { pitch, .. } => {
                EscError::KinematicSingularity { time: t, pitch }
            }
            EscError::IntegrationDiverged { component, .. } => {
                EscError::IntegrationDiverged { time: t, component }
            }
            other => other,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            EscError::IntegrationDiverged { .. }
                | EscError::KinematicSingularity { .. }
                | EscError::StateCorruption(_)
        )
    }

    /// Process exit code: 2 validation, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            EscError::Io { .. } => 4,
            e if e.is_numeric() => 3,
            _ => 2,
        }
    }
}
