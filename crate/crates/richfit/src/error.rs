use richfit_core::ErrorKind;

/// Failures reported by the command-line tool, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, flags, input files or unwritable outputs (exit 2).
    #[error("{0}")]
    Validation(String),
    /// A computation failed on valid inputs (exit 3).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<richfit_core::Error> for CliError {
    fn from(e: richfit_core::Error) -> Self {
        match e.kind() {
            ErrorKind::Validation => CliError::Validation(e.to_string()),
            ErrorKind::Numerical => CliError::Numerical(e.to_string()),
        }
    }
}
