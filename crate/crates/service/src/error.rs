use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lseg_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("undecodable image: {0}")]
    BadImage(String),
    #[error("image is {width}x{height}; the limit is {limit}x{limit}")]
    TooLarge { width: u32, height: u32, limit: u32 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadRequest(_) | Self::UnknownLabel(_) | Self::BadImage(_) => StatusCode::BAD_REQUEST,
            Self::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            Self::Numeric(_) | Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<CoreError> for ServiceError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnknownLabel(l) => Self::UnknownLabel(l),
            CoreError::LabelSet(m) => Self::BadRequest(m),
            CoreError::Numeric(m) => Self::Numeric(m),
            other => Self::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
