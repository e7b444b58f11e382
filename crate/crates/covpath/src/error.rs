use covpath_core::Error;
use thiserror::Error;

/// Errors surfaced by the command line; each maps to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("unsupported shape: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Core(#[from] Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_UNSUPPORTED: i32 = 5;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => EXIT_PARSE,
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Unsupported(_) => EXIT_UNSUPPORTED,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::SingularFactor { .. }
        | Error::NoSignChange { .. }
        | Error::StepFailure { .. }
        | Error::MaxStepsExceeded { .. }
        | Error::SpdLost { .. }
        | Error::ConvergenceFailure { .. }
        | Error::SeedFailure { .. }
        | Error::AllStartsFailed => EXIT_SOLVER,
        _ => EXIT_INVALID,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::NotSpd { min_eig: -1.0, max_eig: 1.0 }).exit_code(), 3);
        assert_eq!(CliError::from(Error::AllStartsFailed).exit_code(), 4);
        assert_eq!(CliError::from(Error::SeedFailure { epsilon: 0.001, residual: 1.0 }).exit_code(), 4);
        assert_eq!(CliError::Parse("x".into()).exit_code(), 2);
        assert_eq!(CliError::Unsupported("x".into()).exit_code(), 5);
    }
}
