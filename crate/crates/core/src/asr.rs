//! Transcription backends. Backends return raw text; normalization is always
//! recomputed locally.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arabic_text::{normalize_default, NormalizedText};
use crate::audio::AudioBuffer;
use crate::remote::{BackendHealth, InferenceRequest, RemoteClient, RemoteError};
use crate::routing::CANONICAL_SAMPLE_RATE_HZ;

pub const MIN_DURATION_S: f64 = 0.1;
pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_REMOTE_MAX_IN_FLIGHT: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsrError {
    #[error("transcription backend {backend} unavailable: {reason}")]
    BackendUnavailable { backend: String, reason: String },
    #[error("transcription backend {backend} timed out")]
    BackendTimeout { backend: String },
    #[error("audio lasts {seconds:.3} s, at least {MIN_DURATION_S} s required")]
    AudioTooShort { seconds: f64 },
    #[error("audio at {0} Hz, transcription expects {CANONICAL_SAMPLE_RATE_HZ} Hz")]
    WrongSampleRate(u32),
}

impl AsrError {
    pub fn kind(&self) -> &'static str {
        match self {
            AsrError::BackendUnavailable { .. } => "BackendUnavailable",
            AsrError::BackendTimeout { .. } => "BackendTimeout",
            AsrError::AudioTooShort { .. } => "AudioTooShort",
            AsrError::WrongSampleRate(_) => "WrongSampleRate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub raw: String,
    pub normalized: NormalizedText,
    pub model_name: String,
    pub latency_ms: u64,
}

impl Transcript {
    pub fn new(raw: String, model_name: impl Into<String>, latency_ms: u64) -> Self {
        let normalized = normalize_default(&raw);
        Self {
            raw,
            normalized,
            model_name: model_name.into(),
            latency_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrBackendDescriptor {
    pub name: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("remote backend {0} has no endpoint")]
    MissingEndpoint(String),
    #[error("mock backend {0} must not declare an endpoint")]
    UnexpectedEndpoint(String),
}

impl AsrBackendDescriptor {
    pub fn mock(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: BackendKind::Mock,
            endpoint: None,
        }
    }

    pub fn remote(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
        }
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        match (self.kind, &self.endpoint) {
            (BackendKind::Remote, None) => Err(DescriptorError::MissingEndpoint(self.name.clone())),
            (BackendKind::Mock, Some(_)) => Err(DescriptorError::UnexpectedEndpoint(self.name.clone())),
            _ => Ok(()),
        }
    }
}

#[async_trait]
pub trait AsrBackend: Send + Sync {
    fn name(&self) -> &str;

    async fn transcribe_raw(&self, audio: &AudioBuffer) -> Result<String, AsrError>;

    async fn health(&self) -> BackendHealth {
        BackendHealth::ok()
    }
}

/// Transcribes `audio` and attaches the locally normalized text and the
/// wall-clock latency of the backend call.
pub async fn transcribe(
    audio: &AudioBuffer,
    backend: &dyn AsrBackend,
    model_name: &str,
) -> Result<Transcript, AsrError> {
    if audio.sample_rate_hz() != CANONICAL_SAMPLE_RATE_HZ {
        return Err(AsrError::WrongSampleRate(audio.sample_rate_hz()));
    }
    let seconds = audio.duration_seconds();
    if seconds < MIN_DURATION_S {
        return Err(AsrError::AudioTooShort { seconds });
    }
    let started = Instant::now();
    let raw = backend.transcribe_raw(audio).await?;
    let latency_ms = started.elapsed().as_millis() as u64;
    Ok(Transcript::new(raw, model_name, latency_ms))
}

/// Fingerprint → transcript table for [`MockAsrBackend`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub default_text: String,
    /// Keys are [`AudioBuffer::fingerprint`] values of the canonical-rate audio.
    pub script: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct MockAsrBackend {
    name: String,
    script: MockScript,
}

impl MockAsrBackend {
    pub fn new(name: impl Into<String>, script: MockScript) -> Self {
        Self {
            name: name.into(),
            script,
        }
    }

    /// Always answers `text`.
    pub fn constant(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(
            name,
            MockScript {
                default_text: text.into(),
                script: BTreeMap::new(),
            },
        )
    }
}

#[async_trait]
impl AsrBackend for MockAsrBackend {
    fn name(&self) -> &str {
        &self.name
    }

    async fn transcribe_raw(&self, audio: &AudioBuffer) -> Result<String, AsrError> {
        let text = self
            .script
            .script
            .get(&audio.fingerprint())
            .unwrap_or(&self.script.default_text);
        Ok(text.clone())
    }
}

#[derive(Debug, Deserialize)]
struct RemoteAsrResponse {
    text: String,
}

/// Model served over HTTP: `POST {url}/transcribe`, answering `{"text": "..."}`.
#[derive(Debug, Clone)]
pub struct RemoteAsrBackend {
    name: String,
    client: RemoteClient,
}

impl RemoteAsrBackend {
    pub fn new(name: impl Into<String>, url: &str, timeout: Duration, max_in_flight: usize) -> Self {
        Self {
            name: name.into(),
            client: RemoteClient::new(url, timeout, max_in_flight),
        }
    }

    pub fn with_defaults(name: impl Into<String>, url: &str) -> Self {
        Self::new(name, url, DEFAULT_REMOTE_TIMEOUT, DEFAULT_REMOTE_MAX_IN_FLIGHT)
    }
}

#[async_trait]
impl AsrBackend for RemoteAsrBackend {
    fn name(&self) -> &str {
        &self.name
    }

    async fn transcribe_raw(&self, audio: &AudioBuffer) -> Result<String, AsrError> {
        let body = InferenceRequest::from_audio(audio);
        match self.client.post::<RemoteAsrResponse>("transcribe", &body).await {
            Ok(r) => Ok(r.text),
            Err(RemoteError::Timeout(_)) => Err(AsrError::BackendTimeout {
                backend: self.name.clone(),
            }),
            Err(RemoteError::Unavailable(reason) | RemoteError::BadResponse(reason)) => {
                Err(AsrError::BackendUnavailable {
                    backend: self.name.clone(),
                    reason,
                })
            }
        }
    }

    async fn health(&self) -> BackendHealth {
        self.client.probe().await
    }
}
