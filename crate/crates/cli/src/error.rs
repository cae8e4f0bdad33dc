use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: flags, config, paths or data.
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] pdisc_core::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) | CliError::Runtime(_) => 2,
        }
    }
}
