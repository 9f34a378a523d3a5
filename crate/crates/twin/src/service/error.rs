use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use twin_core::runtime::RuntimeError;
use twin_core::ValidationReport;

use super::protocol::{ErrorBody, SessionStatus};

#[derive(Debug, Clone, thiserror::Error)]
pub enum ApiError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("scenario failed validation")]
    Invalid(ValidationReport),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("observers cannot submit events")]
    ObserverWrite,
    #[error("session is {0:?}")]
    NotRunning(SessionStatus),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Malformed(_) | ApiError::Invalid(_) | ApiError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::UnknownScenario(_) | ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::ObserverWrite => StatusCode::FORBIDDEN,
            ApiError::NotRunning(_) => StatusCode::CONFLICT,
            ApiError::Runtime(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let error = match self {
            ApiError::Malformed(_) => "MalformedDocument",
            ApiError::Invalid(_) => "ValidationFailed",
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::UnknownScenario(_) => "UnknownScenario",
            ApiError::UnknownSession(_) => "UnknownSession",
            ApiError::ObserverWrite => "ObserverWrite",
            ApiError::NotRunning(SessionStatus::Completed) => "SessionCompleted",
            ApiError::NotRunning(_) => "SessionAborted",
            ApiError::Runtime(e) => e.code(),
            ApiError::Internal(_) => "Internal",
        };
        ErrorBody {
            error: error.to_string(),
            message: self.to_string(),
            report: match self {
                ApiError::Invalid(r) => Some(r.clone()),
                _ => None,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
