//! Typed client for the transcription service's JSON API.

use std::time::Duration;

use dialectic_core::api::{
    ErrorBody, ErrorDetail, FlagRequest, HealthResponse, IdentifyJsonRequest, IdentifyResponse, ModelInfo,
    TranscribeJsonRequest, TranscribeResponse,
};
use reqwest::multipart::{Form, Part};
use reqwest::{RequestBuilder, Response, StatusCode};
use serde::de::DeserializeOwned;
use thiserror::Error;
use uuid::Uuid;

/// Transcription can take several model calls of up to two minutes each.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("HTTP {status}: {} ({}){}", .error.message, .error.kind, .error.backend.as_ref().map(|b| format!(" backend {b}")).unwrap_or_default())]
    Api { status: StatusCode, error: ErrorDetail },
    #[error("HTTP {status}: {body}")]
    Unexpected { status: StatusCode, body: String },
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Http(e) => e.status(),
            ClientError::Api { status, .. } | ClientError::Unexpected { status, .. } => Some(*status),
        }
    }
}

/// How audio travels to the service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Upload {
    #[default]
    Multipart,
    Base64Json,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        Self::with_timeout(base_url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Result<Self, ClientError> {
        let http = reqwest::Client::builder().timeout(timeout).build()?;
        Ok(Self {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn send(req: RequestBuilder) -> Result<Response, ClientError> {
        let resp = req.send().await?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let body = resp.text().await?;
        Err(match serde_json::from_str::<ErrorBody>(&body) {
            Ok(e) => ClientError::Api { status, error: e.error },
            Err(_) => ClientError::Unexpected { status, body },
        })
    }

    async fn json<T: DeserializeOwned>(req: RequestBuilder) -> Result<T, ClientError> {
        Ok(Self::send(req).await?.json().await?)
    }

    fn audio_form(audio: Vec<u8>, file_name: &str) -> Form {
        Form::new().part("file", Part::bytes(audio).file_name(file_name.to_string()))
    }

    /// `dialect_selection` is `"auto"`, `"other"` or a label code.
    pub async fn transcribe(
        &self,
        audio: Vec<u8>,
        file_name: &str,
        dialect_selection: &str,
        min_confidence: Option<f64>,
        upload: Upload,
    ) -> Result<TranscribeResponse, ClientError> {
        let req = self.http.post(self.url("/api/transcribe"));
        let req = match upload {
            Upload::Multipart => {
                let mut form = Self::audio_form(audio, file_name).text("dialect_selection", dialect_selection.to_string());
                if let Some(c) = min_confidence {
                    form = form.text("min_confidence", c.to_string());
                }
                req.multipart(form)
            }
            Upload::Base64Json => req.json(&TranscribeJsonRequest {
                audio_b64: b64(&audio),
                dialect_selection: dialect_selection.to_string(),
                min_confidence,
            }),
        };
        Self::json(req).await
    }

    pub async fn identify(&self, audio: Vec<u8>, file_name: &str, upload: Upload) -> Result<IdentifyResponse, ClientError> {
        let req = self.http.post(self.url("/api/identify"));
        let req = match upload {
            Upload::Multipart => req.multipart(Self::audio_form(audio, file_name)),
            Upload::Base64Json => req.json(&IdentifyJsonRequest { audio_b64: b64(&audio) }),
        };
        Self::json(req).await
    }

    pub async fn flag(&self, event_id: Uuid, model_name: Option<&str>) -> Result<(), ClientError> {
        let body = FlagRequest {
            event_id,
            model_name: model_name.map(str::to_string),
        };
        Self::send(self.http.post(self.url("/api/flag")).json(&body)).await?;
        Ok(())
    }

    pub async fn models(&self) -> Result<Vec<ModelInfo>, ClientError> {
        Self::json(self.http.get(self.url("/api/models"))).await
    }

    /// The health report, including the `failing` report sent with HTTP 503.
    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        let resp = self.http.get(self.url("/health")).send().await?;
        let status = resp.status();
        let body = resp.text().await?;
        serde_json::from_str(&body).map_err(|_| ClientError::Unexpected { status, body })
    }
}

fn b64(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}
