//! Service configuration: one TOML file plus `DIALECTIC_*` environment
//! overrides.
//!
//! Relative paths in the file are resolved against the file's directory;
//! relative paths from the environment are used as given.
//!
//! | variable | field |
//! |---|---|
//! | `DIALECTIC_LISTEN` | `listen` |
//! | `DIALECTIC_REGISTRY` | `registry` |
//! | `DIALECTIC_STORE` | `store` |
//! | `DIALECTIC_BLOB_DIR` | `blob_dir` |
//! | `DIALECTIC_UI_DIR` | `ui_dir` |
//! | `DIALECTIC_MIN_CONFIDENCE` | `min_confidence` |
//! | `DIALECTIC_MAX_PAYLOAD_BYTES` | `limits.max_payload_bytes` |
//! | `DIALECTIC_MAX_DURATION_S` | `limits.max_duration_s` |
//! | `DIALECTIC_DID_ENDPOINT` | `did.endpoint`, switching `did.kind` to `REMOTE` |

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use dialectic_core::asr::BackendKind;
use dialectic_core::audio::IngestLimits;
use dialectic_core::did::{MockDidMode, DEFAULT_REMOTE_MAX_IN_FLIGHT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "DIALECTIC_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {var}: {value:?}")]
    Env { var: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timeouts {
    pub ingest_s: f64,
    pub did_s: f64,
    pub asr_s: f64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self {
            ingest_s: 10.0,
            did_s: 30.0,
            asr_s: 120.0,
        }
    }
}

impl Timeouts {
    pub fn ingest(&self) -> Duration {
        Duration::from_secs_f64(self.ingest_s)
    }

    pub fn did(&self) -> Duration {
        Duration::from_secs_f64(self.did_s)
    }

    pub fn asr(&self) -> Duration {
        Duration::from_secs_f64(self.asr_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DidConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub max_in_flight: usize,
    pub mock: MockDidMode,
}

impl Default for DidConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            max_in_flight: DEFAULT_REMOTE_MAX_IN_FLIGHT,
            mock: MockDidMode::ContentHash { confidence: 0.6 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Model registry file; the built-in registry when absent.
    pub registry: Option<PathBuf>,
    pub store: PathBuf,
    /// When set, uploads are kept as `{sha256}.{ext}` in this directory.
    pub blob_dir: Option<PathBuf>,
    /// Static UI bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
    pub min_confidence: f64,
    pub limits: IngestLimits,
    pub timeouts: Timeouts,
    pub did: DidConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            registry: None,
            store: PathBuf::from("data/feedback.jsonl"),
            blob_dir: None,
            ui_dir: None,
            min_confidence: 0.0,
            limits: IngestLimits::default(),
            timeouts: Timeouts::default(),
            did: DidConfig::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(var: &str, value: String) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Env {
        var: var.to_string(),
        value,
    })
}

impl ServiceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, resolves its relative paths and applies the process
    /// environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = toml::from_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store);
        for p in [&mut self.registry, &mut self.blob_dir, &mut self.ui_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Applies `DIALECTIC_*` overrides read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |name: &str| {
            let var = format!("{ENV_PREFIX}{name}");
            lookup(&var).map(|v| (var, v))
        };
        if let Some((var, v)) = get("LISTEN") {
            self.listen = parse_env(&var, v)?;
        }
        if let Some((_, v)) = get("REGISTRY") {
            self.registry = Some(v.into());
        }
        if let Some((_, v)) = get("STORE") {
            self.store = v.into();
        }
        if let Some((_, v)) = get("BLOB_DIR") {
            self.blob_dir = Some(v.into());
        }
        if let Some((_, v)) = get("UI_DIR") {
            self.ui_dir = Some(v.into());
        }
        if let Some((var, v)) = get("MIN_CONFIDENCE") {
            self.min_confidence = parse_env(&var, v)?;
        }
        if let Some((var, v)) = get("MAX_PAYLOAD_BYTES") {
            self.limits.max_payload_bytes = parse_env(&var, v)?;
        }
        if let Some((var, v)) = get("MAX_DURATION_S") {
            self.limits.max_duration_s = parse_env(&var, v)?;
        }
        if let Some((_, v)) = get("DID_ENDPOINT") {
            self.did.kind = BackendKind::Remote;
            self.did.endpoint = Some(v);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return bad("min_confidence must lie in [0, 1]");
        }
        if self.limits.max_payload_bytes == 0 || !(self.limits.max_duration_s > 0.0) {
            return bad("limits must be positive");
        }
        let t = &self.timeouts;
        if ![t.ingest_s, t.did_s, t.asr_s].iter().all(|s| s.is_finite() && *s > 0.0) {
            return bad("timeouts must be positive");
        }
        match (self.did.kind, &self.did.endpoint) {
            (BackendKind::Remote, None) => return bad("did.endpoint is required for a REMOTE backend"),
            (BackendKind::Mock, Some(_)) => return bad("did.endpoint is only valid for a REMOTE backend"),
            _ => {}
        }
        if self.did.max_in_flight == 0 {
            return bad("did.max_in_flight must be at least 1");
        }
        Ok(())
    }
}
