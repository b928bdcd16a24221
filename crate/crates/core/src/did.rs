//! Dialect identification: an 18-way classifier contract, output validation,
//! and the mock and remote backends.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::dialect::DialectLabel;
use crate::remote::{BackendHealth, InferenceRequest, RemoteClient, RemoteError};
use crate::routing::CANONICAL_SAMPLE_RATE_HZ;

/// Shortest clip the identifier accepts.
pub const MIN_DURATION_S: f64 = 0.1;
/// Backend distributions summing within this distance of 1 are renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 0.01;

pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_REMOTE_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DidError {
    #[error("dialect backend {backend} unavailable: {reason}")]
    BackendUnavailable { backend: String, reason: String },
    #[error("dialect backend {backend} timed out")]
    BackendTimeout { backend: String },
    #[error("malformed dialect backend output: {0}")]
    MalformedBackendOutput(String),
    #[error("audio lasts {seconds:.3} s, at least {MIN_DURATION_S} s required")]
    AudioTooShort { seconds: f64 },
    #[error("audio at {0} Hz, dialect identification expects {CANONICAL_SAMPLE_RATE_HZ} Hz")]
    WrongSampleRate(u32),
}

impl DidError {
    pub fn kind(&self) -> &'static str {
        match self {
            DidError::BackendUnavailable { .. } => "BackendUnavailable",
            DidError::BackendTimeout { .. } => "BackendTimeout",
            DidError::MalformedBackendOutput(_) => "MalformedBackendOutput",
            DidError::AudioTooShort { .. } => "AudioTooShort",
            DidError::WrongSampleRate(_) => "WrongSampleRate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelProbability {
    pub label: DialectLabel,
    pub probability: f64,
}

/// A validated 18-way distribution, most likely label first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidPrediction {
    pub ranked: Vec<LabelProbability>,
    pub backend_id: String,
}

impl DidPrediction {
    /// Validates a raw label→probability list and ranks it.
    ///
    /// Every label must appear exactly once with a probability in `[0, 1]`.
    /// A total within [`RENORMALIZE_TOLERANCE`] of 1 is rescaled to sum to 1;
    /// anything further off is rejected.
    pub fn from_raw(raw: &[(String, f64)], backend_id: &str) -> Result<Self, DidError> {
        let mut probs: [Option<f64>; DialectLabel::COUNT] = [None; DialectLabel::COUNT];
        for (name, p) in raw {
            let label: DialectLabel = name
                .parse()
                .map_err(|e| DidError::MalformedBackendOutput(format!("{e}")))?;
            if !p.is_finite() || !(0.0..=1.0).contains(p) {
                return Err(DidError::MalformedBackendOutput(format!(
                    "probability {p} for {label} outside [0, 1]"
                )));
            }
            if probs[label.index()].replace(*p).is_some() {
                return Err(DidError::MalformedBackendOutput(format!("{label} listed twice")));
            }
        }
        let missing: Vec<&str> = DialectLabel::ALL
            .iter()
            .filter(|d| probs[d.index()].is_none())
            .map(|d| d.code())
            .collect();
        if !missing.is_empty() {
            return Err(DidError::MalformedBackendOutput(format!(
                "missing labels: {}",
                missing.join(", ")
            )));
        }
        let probs = probs.map(|p| p.unwrap_or_default());
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(DidError::MalformedBackendOutput(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut ranked: Vec<LabelProbability> = DialectLabel::ALL
            .iter()
            .map(|&label| LabelProbability {
                label,
                probability: probs[label.index()] / total,
            })
            .collect();
        // stable sort keeps enumeration order among ties
        ranked.sort_by(|a, b| b.probability.total_cmp(&a.probability));
        Ok(Self {
            ranked,
            backend_id: backend_id.to_string(),
        })
    }

    /// The first `k` ranked entries (all of them when `k >= 18`).
    pub fn top_k(&self, k: usize) -> &[LabelProbability] {
        &self.ranked[..k.min(self.ranked.len())]
    }

    pub fn top1(&self) -> LabelProbability {
        self.ranked[0]
    }

    pub fn probability_of(&self, label: DialectLabel) -> f64 {
        self.ranked
            .iter()
            .find(|e| e.label == label)
            .map_or(0.0, |e| e.probability)
    }

    /// Full distribution keyed by label, in enumeration order.
    pub fn distribution(&self) -> BTreeMap<DialectLabel, f64> {
        self.ranked.iter().map(|e| (e.label, e.probability)).collect()
    }
}

#[async_trait]
pub trait DidBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Raw label→probability pairs. Validation happens in [`identify`].
    async fn distribution(&self, audio: &AudioBuffer) -> Result<Vec<(String, f64)>, DidError>;

    async fn health(&self) -> BackendHealth {
        BackendHealth::ok()
    }
}

/// Runs `backend` on `audio` and validates the result.
pub async fn identify(audio: &AudioBuffer, backend: &dyn DidBackend) -> Result<DidPrediction, DidError> {
    if audio.sample_rate_hz() != CANONICAL_SAMPLE_RATE_HZ {
        return Err(DidError::WrongSampleRate(audio.sample_rate_hz()));
    }
    let seconds = audio.duration_seconds();
    if seconds < MIN_DURATION_S {
        return Err(DidError::AudioTooShort { seconds });
    }
    let raw = backend.distribution(audio).await?;
    DidPrediction::from_raw(&raw, backend.id())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MockDidMode {
    /// `label` gets `confidence`; the rest is spread evenly over the other 17.
    Pinned { label: DialectLabel, confidence: f64 },
    Uniform,
    /// A label chosen by hashing the samples gets `confidence`.
    ContentHash {
        #[serde(default = "default_hash_confidence")]
        confidence: f64,
    },
}

fn default_hash_confidence() -> f64 {
    0.6
}

/// Deterministic stand-in for a trained identifier.
#[derive(Debug, Clone)]
pub struct MockDidBackend {
    id: String,
    mode: MockDidMode,
}

impl MockDidBackend {
    pub fn new(mode: MockDidMode) -> Self {
        Self {
            id: "mock-did".to_string(),
            mode,
        }
    }

    pub fn pinned(label: DialectLabel, confidence: f64) -> Self {
        Self::new(MockDidMode::Pinned { label, confidence })
    }

    pub fn uniform() -> Self {
        Self::new(MockDidMode::Uniform)
    }

    pub fn content_hash() -> Self {
        Self::new(MockDidMode::ContentHash {
            confidence: default_hash_confidence(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn peaked(label: DialectLabel, confidence: f64) -> Vec<(String, f64)> {
        let rest = (1.0 - confidence) / (DialectLabel::COUNT - 1) as f64;
        DialectLabel::ALL
            .iter()
            .map(|&d| (d.code().to_string(), if d == label { confidence } else { rest }))
            .collect()
    }

    pub fn hashed_label(audio: &AudioBuffer) -> DialectLabel {
        let digest = Sha256::digest(audio.to_f32_le_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        DialectLabel::ALL[(u64::from_le_bytes(head) % DialectLabel::COUNT as u64) as usize]
    }
}

#[async_trait]
impl DidBackend for MockDidBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn distribution(&self, audio: &AudioBuffer) -> Result<Vec<(String, f64)>, DidError> {
        Ok(match &self.mode {
            MockDidMode::Pinned { label, confidence } => Self::peaked(*label, *confidence),
            MockDidMode::Uniform => DialectLabel::ALL
                .iter()
                .map(|d| (d.code().to_string(), 1.0 / DialectLabel::COUNT as f64))
                .collect(),
            MockDidMode::ContentHash { confidence } => {
                Self::peaked(Self::hashed_label(audio), *confidence)
            }
        })
    }
}

#[derive(Debug, Deserialize)]
struct RemoteDidResponse {
    probabilities: HashMap<String, f64>,
}

/// Identifier served over HTTP: `POST {url}/identify`, answering
/// `{"probabilities": {"MSA": 0.1, ..., "YEM": 0.0}}`.
#[derive(Debug, Clone)]
pub struct RemoteDidBackend {
    id: String,
    client: RemoteClient,
}

impl RemoteDidBackend {
    pub fn new(url: &str, timeout: Duration, max_in_flight: usize) -> Self {
        Self {
            id: format!("remote-did:{}", url.trim_end_matches('/')),
            client: RemoteClient::new(url, timeout, max_in_flight),
        }
    }

    pub fn with_defaults(url: &str) -> Self {
        Self::new(url, DEFAULT_REMOTE_TIMEOUT, DEFAULT_REMOTE_MAX_IN_FLIGHT)
    }
}

#[async_trait]
impl DidBackend for RemoteDidBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn distribution(&self, audio: &AudioBuffer) -> Result<Vec<(String, f64)>, DidError> {
        let body = InferenceRequest::from_audio(audio);
        match self.client.post::<RemoteDidResponse>("identify", &body).await {
            Ok(r) => Ok(r.probabilities.into_iter().collect()),
            Err(RemoteError::Timeout(_)) => Err(DidError::BackendTimeout {
                backend: self.id.clone(),
            }),
            Err(RemoteError::Unavailable(reason)) => Err(DidError::BackendUnavailable {
                backend: self.id.clone(),
                reason,
            }),
            Err(RemoteError::BadResponse(reason)) => Err(DidError::MalformedBackendOutput(reason)),
        }
    }

    async fn health(&self) -> BackendHealth {
        self.client.probe().await
    }
}
