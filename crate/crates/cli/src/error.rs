use thiserror::Error;

/// Errors surfaced by the command-line front end, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("property failure: {0}")]
    Property(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] finpop::Error),
}

impl CliError {
    /// 0 success, 1 configuration, 2 property failure, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Property(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e {
                finpop::Error::NoConvergence(_) => 3,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
