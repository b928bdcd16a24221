//! JSON bodies exchanged between the HTTP service and its clients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::did::{DidPrediction, LabelProbability};
use crate::dialect::{DialectLabel, DialectUsed};
use crate::routing::{Architecture, ModelEntry, RoutingSource};

/// Number of ranked labels shown to users.
pub const TOP_K: usize = 5;

fn auto() -> String {
    "auto".into()
}

/// JSON form of a transcription request. The multipart form carries the
/// same fields with the audio in a `file` part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscribeJsonRequest {
    pub audio_b64: String,
    #[serde(default = "auto")]
    pub dialect_selection: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyJsonRequest {
    pub audio_b64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelTranscription {
    pub model_name: String,
    pub raw_text: String,
    pub normalized_text: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFailure {
    pub model_name: String,
    pub error: ErrorDetail,
}

/// One entry of `results`: a transcript or the reason the model failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelResult {
    Ok(ModelTranscription),
    Failed(ModelFailure),
}

impl ModelResult {
    pub fn model_name(&self) -> &str {
        match self {
            ModelResult::Ok(t) => &t.model_name,
            ModelResult::Failed(f) => &f.model_name,
        }
    }

    pub fn transcription(&self) -> Option<&ModelTranscription> {
        match self {
            ModelResult::Ok(t) => Some(t),
            ModelResult::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscribeResponse {
    pub event_id: Uuid,
    pub dialect_used: DialectUsed,
    pub source: RoutingSource,
    /// Present exactly when dialect identification ran and succeeded.
    pub did_top5: Option<Vec<LabelProbability>>,
    pub min_confidence_met: bool,
    pub results: Vec<ModelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyResponse {
    pub top5: Vec<LabelProbability>,
    pub full: BTreeMap<DialectLabel, f64>,
    pub backend_id: String,
}

impl From<&DidPrediction> for IdentifyResponse {
    fn from(p: &DidPrediction) -> Self {
        Self {
            top5: p.top_k(TOP_K).to_vec(),
            full: p.distribution(),
            backend_id: p.backend_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagRequest {
    pub event_id: Uuid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
}

/// Public view of a registry entry; backend wiring is not exposed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_name: String,
    pub dialects: Vec<DialectLabel>,
    pub dataset: String,
    pub architecture: Architecture,
}

impl From<&ModelEntry> for ModelInfo {
    fn from(e: &ModelEntry) -> Self {
        Self {
            model_name: e.model_name.clone(),
            dialects: e.dialects.iter().copied().collect(),
            dataset: e.dataset.clone(),
            architecture: e.architecture,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HealthStatus {
    Ok,
    Degraded,
    Failing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentHealth {
    pub name: String,
    pub reachable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: HealthStatus,
    pub backends: Vec<ComponentHealth>,
    pub store: ComponentHealth,
}

/// Pipeline stage an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Request,
    Ingest,
    Did,
    Asr,
    Store,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub kind: String,
    pub message: String,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_result_round_trips_both_shapes() {
        let ok = ModelResult::Ok(ModelTranscription {
            model_name: "A".into(),
            raw_text: "نص".into(),
            normalized_text: "نص".into(),
            latency_ms: 3,
        });
        let failed = ModelResult::Failed(ModelFailure {
            model_name: "B".into(),
            error: ErrorDetail {
                kind: "backend_timeout".into(),
                message: "timed out".into(),
                stage: Stage::Asr,
                backend: Some("b".into()),
            },
        });
        for r in [ok, failed] {
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(serde_json::from_str::<ModelResult>(&json).unwrap(), r);
        }
    }

    #[test]
    fn identify_response_from_uniform() {
        let raw: Vec<(String, f64)> = DialectLabel::ALL
            .iter()
            .map(|l| (l.code().to_string(), 1.0 / 18.0))
            .collect();
        let p = DidPrediction::from_raw(&raw, "mock-did").unwrap();
        let r = IdentifyResponse::from(&p);
        let labels: Vec<_> = r.top5.iter().map(|lp| lp.label).collect();
        assert_eq!(labels, &DialectLabel::ALL[..5]);
        assert_eq!(r.full.len(), 18);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["full"]["EGY"].is_number());
        let back: IdentifyResponse = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn json_request_defaults_to_auto() {
        let r: TranscribeJsonRequest = serde_json::from_str(r#"{"audio_b64":""}"#).unwrap();
        assert_eq!(r.dialect_selection, "auto");
        assert_eq!(r.min_confidence, None);
        assert!(serde_json::from_str::<TranscribeJsonRequest>(r#"{"audio_b64":"","x":1}"#).is_err());
    }

    #[test]
    fn empty_dialect_set_is_empty_array() {
        let reg = crate::routing::ModelRegistry::default_registry();
        let generic = reg.generic();
        let v = serde_json::to_value(ModelInfo::from(&generic[0])).unwrap();
        assert_eq!(v["dialects"], serde_json::json!([]));
    }
}
