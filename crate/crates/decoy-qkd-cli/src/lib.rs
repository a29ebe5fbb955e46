//! Command implementations behind the `decoy-qkd` binary.
//!
//! Everything here is plain library code so the commands can be driven
//! from integration tests exactly as the binary drives them: `simulate`
//! runs a seeded campaign and writes self-contained session records,
//! `analyze` recomputes security results from stored tallies, `sweep`
//! emits threshold-crossing curves, and `optimize` searches source
//! parameters. Every output file gets a metadata sidecar naming the
//! schema version, variant, widening policy and seed.

pub mod commands;
pub mod config;
pub mod records;
pub mod summary;
pub mod sweep;

/// Version string embedded in every dataset and sidecar.
pub const SCHEMA_VERSION: &str = "1";

/// Error category determining the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration, flags, or input data schema (exit 2).
    Validation,
    /// Simulation/analysis failure at runtime (exit 3).
    Runtime,
    /// Filesystem failure (exit 4).
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Runtime => 3,
            ErrorKind::Io => 4,
        }
    }
}

/// A command failure carrying its exit category.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn from_io(context: &str, err: std::io::Error) -> Self {
        Self::io(format!("{context}: {err}"))
    }
}

impl From<decoy_qkd::QkdError> for CliError {
    fn from(err: decoy_qkd::QkdError) -> Self {
        use decoy_qkd::QkdError::*;
        match err {
            Domain { .. } | Validation { .. } | EmptyFeasibleSet => {
                Self::validation(err.to_string())
            }
            DegenerateClass { .. } | Parameter(_) | InfeasibleScenario(_) => {
                Self::runtime(err.to_string())
            }
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
