use thiserror::Error;

/// CLI failure classes, mapped onto exit codes: validation errors exit 1,
/// I/O errors exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<codetr_core::Error> for CliError {
    fn from(e: codetr_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub fn io_context(what: &str, path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{what} {}: {e}", path.display()))
}

pub type CliResult<T> = Result<T, CliError>;
