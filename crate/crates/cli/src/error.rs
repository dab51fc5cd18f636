use heterosync_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error("{0}")]
    Model(CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Model(e)
    }
}

impl CliError {
    /// 1 for configuration and input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}
