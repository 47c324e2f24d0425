use thiserror::Error;

use crate::parse::ParseError;

pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_USAGE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Numerical(#[from] linea::Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => EXIT_USAGE,
            CliError::Numerical(_) | CliError::Output(_) => EXIT_NUMERICAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "InvalidArguments",
            CliError::Parse(_) => "ParseError",
            CliError::Numerical(e) => e.kind(),
            CliError::Output(_) => "OutputError",
        }
    }
}
