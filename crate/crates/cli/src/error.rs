use thiserror::Error;

use newsbias_core::Error as CoreError;
use newsbias_service::ServiceError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Service(#[from] ServiceError),
}

fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Config(_) | CoreError::Argument(_) => 2,
        CoreError::Io { .. } => 3,
        CoreError::Unavailable(_) => 5,
        _ => 4,
    }
}

impl CliError {
    /// 2 usage or configuration, 3 file access, 4 bad data or broken
    /// contract, 5 unreachable external service.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) | CliError::Service(ServiceError::Core(e)) => core_code(e),
            CliError::Service(ServiceError::Io(_)) => 3,
            CliError::Service(ServiceError::ScorerUnavailable(_) | ServiceError::ScorerResponse(_)) => 5,
            CliError::Service(ServiceError::BadRequest(_)) => 2,
            CliError::Service(_) => 4,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
