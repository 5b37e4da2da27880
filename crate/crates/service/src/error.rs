use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),

    #[error("unknown task {0:?}")]
    UnknownTask(String),

    /// The task exists but was never handed to this annotator.
    #[error("task {task:?} is not assigned to {annotator:?}")]
    NotAssigned { task: String, annotator: String },

    #[error("task {0:?} already has a judgment")]
    Duplicate(String),

    #[error("answer {answer} is not valid for {kind} task {task:?}")]
    InvalidAnswer { task: String, kind: String, answer: String },

    #[error("annotator {annotator:?} already registered as {existing}")]
    GroupConflict { annotator: String, existing: String },

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("external scorer unavailable: {0}")]
    ScorerUnavailable(String),

    #[error("external scorer returned an unusable response: {0}")]
    ScorerResponse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] newsbias_core::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownAnnotator(_) | ServiceError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ServiceError::NotAssigned { .. } | ServiceError::InvalidAnswer { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Duplicate(_) | ServiceError::GroupConflict { .. } => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::ScorerUnavailable(_) | ServiceError::ScorerResponse(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Io(_) | ServiceError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<ServiceError> for newsbias_core::Error {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Core(e) => e,
            other => newsbias_core::Error::Unavailable(other.to_string()),
        }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
