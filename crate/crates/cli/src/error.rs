//! Error type carrying the process exit code.

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs, refused overwrites. Exit 1.
    #[error("{0}")]
    Invalid(String),
    /// Failure while doing the requested work. Exit 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

/// Wraps a displayable error with the path it concerns.
pub fn at(path: &Path) -> impl Fn(&dyn std::fmt::Display) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

pub trait Context<T> {
    fn invalid_at(self, path: &Path) -> Result<T, CliError>;
    fn runtime_at(self, path: &Path) -> Result<T, CliError>;
    fn invalid(self, what: &str) -> Result<T, CliError>;
    fn runtime(self, what: &str) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> Context<T> for Result<T, E> {
    fn invalid_at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|e| CliError::Invalid(at(path)(&e)))
    }

    fn runtime_at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(at(path)(&e)))
    }

    fn invalid(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Invalid(format!("{what}: {e}")))
    }

    fn runtime(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(format!("{what}: {e}")))
    }
}
