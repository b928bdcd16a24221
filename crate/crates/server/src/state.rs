use std::sync::Arc;

use dialectic_core::asr::BackendKind;
use dialectic_core::audio::{DecoderRegistry, IngestLimits};
use dialectic_core::did::{DidBackend, MockDidBackend, RemoteDidBackend};
use dialectic_core::feedback::{AudioBlobStore, FeedbackError, FeedbackStore};
use dialectic_core::routing::{AsrBackends, ModelRegistry, RegistryError};
use thiserror::Error;

use crate::config::{ServiceConfig, Timeouts};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("registry: {0}")]
    Registry(#[from] RegistryError),
    #[error("feedback store: {0}")]
    Store(#[from] FeedbackError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

/// Everything a request handler needs. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<ModelRegistry>,
    pub did: Arc<dyn DidBackend>,
    pub asr: AsrBackends,
    pub store: Arc<FeedbackStore>,
    pub blobs: Option<AudioBlobStore>,
    pub decoders: Arc<DecoderRegistry>,
    pub limits: IngestLimits,
    pub min_confidence: f64,
    pub timeouts: Timeouts,
}

impl AppState {
    /// State with default limits, timeouts and WAV-only decoding, and mock
    /// or remote transcription backends as the registry declares.
    pub fn new(registry: ModelRegistry, did: Arc<dyn DidBackend>, store: FeedbackStore) -> Self {
        let timeouts = Timeouts::default();
        let asr = AsrBackends::from_registry(&registry, timeouts.asr());
        Self {
            registry: Arc::new(registry),
            did,
            asr,
            store: Arc::new(store),
            blobs: None,
            decoders: Arc::new(DecoderRegistry::new()),
            limits: IngestLimits::default(),
            min_confidence: 0.0,
            timeouts,
        }
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, StartupError> {
        let registry = match &cfg.registry {
            Some(path) => ModelRegistry::load(path)?,
            None => ModelRegistry::default_registry(),
        };
        let did: Arc<dyn DidBackend> = match (cfg.did.kind, &cfg.did.endpoint) {
            (BackendKind::Remote, Some(url)) => Arc::new(RemoteDidBackend::new(
                url,
                cfg.timeouts.did(),
                cfg.did.max_in_flight,
            )),
            _ => Arc::new(MockDidBackend::new(cfg.did.mock.clone())),
        };
        let store = FeedbackStore::open(&cfg.store)?;
        let blobs = cfg.blob_dir.as_ref().map(|d| AudioBlobStore::new(d.clone())).transpose()?;
        let asr = AsrBackends::from_registry(&registry, cfg.timeouts.asr());
        Ok(Self {
            registry: Arc::new(registry),
            did,
            asr,
            store: Arc::new(store),
            blobs,
            decoders: Arc::new(DecoderRegistry::new()),
            limits: cfg.limits,
            min_confidence: cfg.min_confidence,
            timeouts: cfg.timeouts.clone(),
        })
    }

    /// Request body cap: the payload limit plus room for base64 and form
    /// overhead. The exact payload check happens during ingestion.
    pub fn body_limit(&self) -> usize {
        self.limits.max_payload_bytes / 3 * 4 + 64 * 1024
    }
}
