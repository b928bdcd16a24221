//! Model registry and the dialect → model selection rules.
//!
//! * A manual choice of a covered dialect runs every model covering it and
//!   skips identification.
//! * A manual choice of an uncovered dialect, or `Other`, still runs
//!   identification (its prediction is shown to the user) and falls back to
//!   the generic models.
//! * `Auto` runs identification and picks the top-1 dialect's models when it
//!   is covered and its probability reaches `min_confidence`; otherwise it
//!   falls back to the generic models.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asr::{
    transcribe, AsrBackend, AsrBackendDescriptor, AsrError, BackendKind, DescriptorError,
    MockAsrBackend, MockScript, RemoteAsrBackend, Transcript,
};
use crate::audio::AudioBuffer;
use crate::did::{identify, DidBackend, DidError, DidPrediction};
use crate::dialect::{DialectLabel, DialectSelection, DialectUsed};

/// Sample rate every model backend consumes.
pub const CANONICAL_SAMPLE_RATE_HZ: u32 = 16_000;

const DEFAULT_REGISTRY_TOML: &str = include_str!("../data/default_registry.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Architecture {
    Whisper,
    Wav2vec2,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Whisper => "Whisper",
            Architecture::Wav2vec2 => "Wav2vec 2.0",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub model_name: String,
    /// Empty for generic zero-shot models.
    pub dialects: BTreeSet<DialectLabel>,
    pub dataset: String,
    pub architecture: Architecture,
    pub backend: AsrBackendDescriptor,
    /// Responses for a `MOCK` backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockScript>,
}

impl ModelEntry {
    pub fn is_generic(&self) -> bool {
        self.dialects.is_empty()
    }

    pub fn covers(&self, dialect: DialectLabel) -> bool {
        self.dialects.contains(&dialect)
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("registry has no generic model to fall back to")]
    NoGenericModels,
    #[error("duplicate model name {0:?}")]
    DuplicateModel(String),
    #[error("duplicate backend name {0:?}")]
    DuplicateBackend(String),
    #[error("model with empty name")]
    EmptyName,
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error("registry parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("reading registry {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct RegistryFile {
    models: Vec<ModelEntry>,
}

/// Ordered list of routable models. Order is significant: it is the order in
/// which results are reported and the first selected model provides the
/// exported silver transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRegistry {
    entries: Vec<ModelEntry>,
}

impl ModelRegistry {
    pub fn new(entries: Vec<ModelEntry>) -> Result<Self, RegistryError> {
        let mut names = HashSet::new();
        let mut backends = HashSet::new();
        for e in &entries {
            if e.model_name.trim().is_empty() {
                return Err(RegistryError::EmptyName);
            }
            if !names.insert(e.model_name.as_str()) {
                return Err(RegistryError::DuplicateModel(e.model_name.clone()));
            }
            if !backends.insert(e.backend.name.as_str()) {
                return Err(RegistryError::DuplicateBackend(e.backend.name.clone()));
            }
            e.backend.validate()?;
        }
        if !entries.iter().any(ModelEntry::is_generic) {
            return Err(RegistryError::NoGenericModels);
        }
        Ok(Self { entries })
    }

    pub fn from_toml_str(s: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile = toml::from_str(s)?;
        Self::new(file.models)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let s = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&s)
    }

    /// The six shipped models: two MSA, one Moroccan, one Egyptian and two
    /// generic zero-shot models.
    pub fn default_registry() -> Self {
        Self::from_toml_str(DEFAULT_REGISTRY_TOML).expect("bundled registry is valid")
    }

    pub fn default_toml() -> &'static str {
        DEFAULT_REGISTRY_TOML
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&RegistryFile {
            models: self.entries.clone(),
        })
        .expect("registry serializes")
    }

    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    pub fn get(&self, model_name: &str) -> Option<&ModelEntry> {
        self.entries.iter().find(|e| e.model_name == model_name)
    }

    pub fn generic(&self) -> Vec<ModelEntry> {
        self.entries.iter().filter(|e| e.is_generic()).cloned().collect()
    }

    pub fn covering(&self, dialect: DialectLabel) -> Vec<ModelEntry> {
        self.entries.iter().filter(|e| e.covers(dialect)).cloned().collect()
    }

    pub fn is_covered(&self, dialect: DialectLabel) -> bool {
        self.entries.iter().any(|e| e.covers(dialect))
    }

    /// Union of all dialects with a dedicated model, in label order.
    pub fn covered_dialects(&self) -> BTreeSet<DialectLabel> {
        self.entries.iter().flat_map(|e| e.dialects.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoutingSource {
    Manual,
    AutoDid,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDecision {
    pub selected_models: Vec<ModelEntry>,
    pub dialect_used: DialectUsed,
    pub source: RoutingSource,
    pub did_prediction: Option<DidPrediction>,
    /// False only when `Auto` fell back because top-1 missed the threshold.
    pub min_confidence_met: bool,
}

impl RoutingDecision {
    pub fn model_names(&self) -> Vec<&str> {
        self.selected_models.iter().map(|e| e.model_name.as_str()).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error(transparent)]
    Did(#[from] DidError),
    #[error("registry has no generic model to fall back to")]
    NoGenericModels,
    #[error("min_confidence {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

pub async fn route(
    selection: DialectSelection,
    audio: &AudioBuffer,
    registry: &ModelRegistry,
    did_backend: &dyn DidBackend,
    min_confidence: f64,
) -> Result<RoutingDecision, RoutingError> {
    if !(0.0..=1.0).contains(&min_confidence) {
        return Err(RoutingError::InvalidThreshold(min_confidence));
    }
    let generic = registry.generic();
    if generic.is_empty() {
        return Err(RoutingError::NoGenericModels);
    }

    let decision = match selection {
        DialectSelection::Dialect(d) if registry.is_covered(d) => RoutingDecision {
            selected_models: registry.covering(d),
            dialect_used: DialectUsed::Dialect(d),
            source: RoutingSource::Manual,
            did_prediction: None,
            min_confidence_met: true,
        },
        DialectSelection::Dialect(d) => {
            // identification only feeds the display here, so its failure is not fatal
            let did_prediction = match identify(audio, did_backend).await {
                Ok(p) => Some(p),
                Err(e) => {
                    tracing::warn!(error = %e, "dialect identification failed on manual fallback");
                    None
                }
            };
            RoutingDecision {
                selected_models: generic,
                dialect_used: DialectUsed::Dialect(d),
                source: RoutingSource::Fallback,
                did_prediction,
                min_confidence_met: true,
            }
        }
        DialectSelection::Other => RoutingDecision {
            selected_models: generic,
            dialect_used: DialectUsed::Other,
            source: RoutingSource::Fallback,
            did_prediction: Some(identify(audio, did_backend).await?),
            min_confidence_met: true,
        },
        DialectSelection::Auto => {
            let pred = identify(audio, did_backend).await?;
            let top = pred.top1();
            let confident = top.probability >= min_confidence;
            let (selected_models, source) = if confident && registry.is_covered(top.label) {
                (registry.covering(top.label), RoutingSource::AutoDid)
            } else {
                (generic, RoutingSource::Fallback)
            };
            RoutingDecision {
                selected_models,
                dialect_used: DialectUsed::Dialect(top.label),
                source,
                did_prediction: Some(pred),
                min_confidence_met: confident,
            }
        }
    };
    Ok(decision)
}

/// Per-model outcome of running the selected models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub model_name: String,
    pub result: Result<Transcript, AsrError>,
}

/// Instantiated transcription backends keyed by model name.
#[derive(Clone, Default)]
pub struct AsrBackends {
    by_model: HashMap<String, Arc<dyn AsrBackend>>,
}

impl AsrBackends {
    /// Builds mock or remote clients from each entry's descriptor.
    pub fn from_registry(registry: &ModelRegistry, remote_timeout: Duration) -> Self {
        let mut by_model: HashMap<String, Arc<dyn AsrBackend>> = HashMap::new();
        for e in registry.entries() {
            let backend: Arc<dyn AsrBackend> = match (e.backend.kind, &e.backend.endpoint) {
                (BackendKind::Remote, Some(url)) => Arc::new(RemoteAsrBackend::new(
                    e.backend.name.clone(),
                    url,
                    remote_timeout,
                    crate::asr::DEFAULT_REMOTE_MAX_IN_FLIGHT,
                )),
                _ => Arc::new(MockAsrBackend::new(
                    e.backend.name.clone(),
                    e.mock.clone().unwrap_or_default(),
                )),
            };
            by_model.insert(e.model_name.clone(), backend);
        }
        Self { by_model }
    }

    pub fn insert(&mut self, model_name: impl Into<String>, backend: Arc<dyn AsrBackend>) {
        self.by_model.insert(model_name.into(), backend);
    }

    pub fn get(&self, model_name: &str) -> Option<&Arc<dyn AsrBackend>> {
        self.by_model.get(model_name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Arc<dyn AsrBackend>)> {
        self.by_model.iter()
    }

    /// Transcribes with every selected model concurrently. Results come back
    /// in selection (registry) order; a call exceeding `timeout` yields
    /// [`AsrError::BackendTimeout`].
    pub async fn transcribe_selected(
        &self,
        audio: &AudioBuffer,
        decision: &RoutingDecision,
        timeout: Duration,
    ) -> Vec<ModelOutcome> {
        let calls = decision.selected_models.iter().map(|entry| async move {
            let result = match self.by_model.get(&entry.model_name) {
                None => Err(AsrError::BackendUnavailable {
                    backend: entry.backend.name.clone(),
                    reason: "no backend instantiated".into(),
                }),
                Some(backend) => {
                    match tokio::time::timeout(
                        timeout,
                        transcribe(audio, backend.as_ref(), &entry.model_name),
                    )
                    .await
                    {
                        Ok(r) => r,
                        Err(_) => Err(AsrError::BackendTimeout {
                            backend: entry.backend.name.clone(),
                        }),
                    }
                }
            };
            ModelOutcome {
                model_name: entry.model_name.clone(),
                result,
            }
        });
        join_all(calls).await
    }
}

impl fmt::Debug for AsrBackends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsrBackends")
            .field("models", &self.by_model.keys().collect::<Vec<_>>())
            .finish()
    }
}
