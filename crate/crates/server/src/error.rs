use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dialectic_core::api::{ErrorBody, ErrorDetail, Stage};
use dialectic_core::asr::AsrError;
use dialectic_core::audio::AudioError;
use dialectic_core::did::DidError;
use dialectic_core::feedback::FeedbackError;
use dialectic_core::routing::RoutingError;

/// An error response: status plus a JSON [`ErrorBody`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub detail: ErrorDetail,
}

impl ApiError {
    pub fn new(status: StatusCode, stage: Stage, kind: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            detail: ErrorDetail {
                kind: kind.to_string(),
                message: message.into(),
                stage,
                backend: None,
            },
        }
    }

    pub fn with_backend(mut self, backend: impl Into<String>) -> Self {
        self.detail.backend = Some(backend.into());
        self
    }

    pub fn bad_request(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, Stage::Request, kind, message)
    }

    pub fn internal(stage: Stage, message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, stage, "Internal", message)
    }

    pub fn stage_timeout(stage: Stage, backend: Option<&str>) -> Self {
        let e = Self::new(StatusCode::BAD_GATEWAY, stage, "BackendTimeout", "time budget exceeded");
        match backend {
            Some(b) => e.with_backend(b),
            None => e,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.detail })).into_response()
    }
}

impl From<AudioError> for ApiError {
    fn from(e: AudioError) -> Self {
        let status = match e {
            AudioError::PayloadTooLarge { .. } | AudioError::TooLong { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            AudioError::UnsupportedEncoding(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, Stage::Ingest, e.kind(), e.to_string())
    }
}

impl From<DidError> for ApiError {
    fn from(e: DidError) -> Self {
        let (kind, message) = (e.kind(), e.to_string());
        match e {
            DidError::BackendUnavailable { backend, .. } | DidError::BackendTimeout { backend } => {
                Self::new(StatusCode::BAD_GATEWAY, Stage::Did, kind, message).with_backend(backend)
            }
            DidError::MalformedBackendOutput(_) => Self::new(StatusCode::BAD_GATEWAY, Stage::Did, kind, message),
            DidError::AudioTooShort { .. } => Self::new(StatusCode::BAD_REQUEST, Stage::Ingest, kind, message),
            DidError::WrongSampleRate(_) => Self::internal(Stage::Did, message),
        }
    }
}

impl From<RoutingError> for ApiError {
    fn from(e: RoutingError) -> Self {
        match e {
            RoutingError::Did(d) => d.into(),
            RoutingError::InvalidThreshold(t) => {
                Self::bad_request("InvalidMinConfidence", format!("min_confidence {t} outside [0, 1]"))
            }
            other => Self::internal(Stage::Did, other.to_string()),
        }
    }
}

/// Response for a transcription where every selected model failed.
pub fn asr_failure(e: &AsrError, backend: &str) -> ApiError {
    let status = match e {
        AsrError::AudioTooShort { .. } => StatusCode::BAD_REQUEST,
        AsrError::WrongSampleRate(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_GATEWAY,
    };
    ApiError::new(status, Stage::Asr, e.kind(), e.to_string()).with_backend(backend)
}

impl From<FeedbackError> for ApiError {
    fn from(e: FeedbackError) -> Self {
        let message = e.to_string();
        match e {
            FeedbackError::UnknownEvent(_) => {
                Self::new(StatusCode::NOT_FOUND, Stage::Store, "UnknownEvent", message)
            }
            FeedbackError::UnknownModel { .. } => {
                Self::new(StatusCode::NOT_FOUND, Stage::Store, "UnknownModel", message)
            }
            _ => Self::internal(Stage::Store, message),
        }
    }
}
