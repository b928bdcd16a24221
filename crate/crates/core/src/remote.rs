//! JSON-over-HTTP client shared by the remote dialect-identification and
//! transcription backends.
//!
//! Both model families use the same request body:
//!
//! ```json
//! {"sample_rate": 16000, "samples_b64": "<base64 of little-endian f32 PCM>"}
//! ```
//!
//! Identification posts to `{url}/identify`, transcription to
//! `{url}/transcribe`.

use std::sync::Arc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::audio::AudioBuffer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub sample_rate: u32,
    pub samples_b64: String,
}

impl InferenceRequest {
    pub fn from_audio(audio: &AudioBuffer) -> Self {
        Self {
            sample_rate: audio.sample_rate_hz(),
            samples_b64: STANDARD.encode(audio.to_f32_le_bytes()),
        }
    }

    /// Decodes the payload back into samples.
    pub fn samples(&self) -> Result<Vec<f32>, String> {
        let bytes = STANDARD.decode(&self.samples_b64).map_err(|e| e.to_string())?;
        if bytes.len() % 4 != 0 {
            return Err(format!("{} bytes is not a whole number of f32 samples", bytes.len()));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemoteError {
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("bad response: {0}")]
    BadResponse(String),
}

/// Reachability of one backend, reported by `/health`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendHealth {
    pub reachable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl BackendHealth {
    pub fn ok() -> Self {
        Self {
            reachable: true,
            detail: None,
        }
    }

    pub fn down(detail: impl Into<String>) -> Self {
        Self {
            reachable: false,
            detail: Some(detail.into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteClient {
    http: reqwest::Client,
    base_url: String,
    timeout: Duration,
    permits: Arc<Semaphore>,
}

impl RemoteClient {
    /// `max_in_flight` requests run at once; later callers queue. The timeout
    /// covers queueing and the request itself.
    pub fn new(base_url: &str, timeout: Duration, max_in_flight: usize) -> Self {
        Self {
            http: reqwest::Client::new(),
            base_url: base_url.trim_end_matches('/').to_string(),
            timeout,
            permits: Arc::new(Semaphore::new(max_in_flight.max(1))),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub async fn post<T: DeserializeOwned>(
        &self,
        path: &str,
        body: &InferenceRequest,
    ) -> Result<T, RemoteError> {
        let url = format!("{}/{}", self.base_url, path.trim_start_matches('/'));
        let call = async {
            let _permit = self
                .permits
                .acquire()
                .await
                .map_err(|e| RemoteError::Unavailable(e.to_string()))?;
            let resp = self
                .http
                .post(&url)
                .json(body)
                .send()
                .await
                .map_err(|e| RemoteError::Unavailable(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(RemoteError::Unavailable(format!("{url} returned {status}")));
            }
            resp.json::<T>()
                .await
                .map_err(|e| RemoteError::BadResponse(e.to_string()))
        };
        match tokio::time::timeout(self.timeout, call).await {
            Ok(r) => r,
            Err(_) => Err(RemoteError::Timeout(self.timeout)),
        }
    }

    /// Any HTTP answer from `{url}/health` counts as reachable.
    pub async fn probe(&self) -> BackendHealth {
        let url = format!("{}/health", self.base_url);
        let req = self.http.get(&url).timeout(Duration::from_secs(5)).send();
        match req.await {
            Ok(_) => BackendHealth::ok(),
            Err(e) => BackendHealth::down(e.to_string()),
        }
    }
}
