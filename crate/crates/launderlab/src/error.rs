//! Error taxonomy shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not line up for the requested operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value is missing, unknown, or out of range.
    #[error("invalid config: {0}")]
    Config(String),

    /// A dataset with the wrong role reached a training or evaluation path.
    #[error("contamination guard: {0}")]
    ContaminationGuard(String),

    /// Dataset generation could not satisfy its constraints.
    #[error("generation failed: {0}")]
    Generation(String),

    /// A serialized file failed to parse at a specific line.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A file is structurally wrong (bad header, bad magic, schema drift).
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed input carrying invalid values.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for validation-class errors, 2 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Generation(_) => 2,
            _ => 1,
        }
    }
}
