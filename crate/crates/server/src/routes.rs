use std::path::Path;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Request, State};
use axum::http::{header, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use dialectic_core::api::{
    ComponentHealth, FlagRequest, HealthResponse, HealthStatus, IdentifyJsonRequest, IdentifyResponse,
    ModelFailure, ModelInfo, ModelResult, ModelTranscription, Stage, TranscribeJsonRequest,
    TranscribeResponse, TOP_K,
};
use dialectic_core::audio::{ingest, Ingested};
use dialectic_core::did::{identify, MIN_DURATION_S};
use dialectic_core::feedback::{content_digest, ModelTranscript, TranscriptionEvent};
use dialectic_core::routing::route;
use dialectic_core::{DialectSelection, CANONICAL_SAMPLE_RATE_HZ};
use futures::future::join_all;
use tower_http::services::ServeDir;

use crate::error::{asr_failure, ApiError};
use crate::state::AppState;

const PROBE_TIMEOUT: Duration = Duration::from_secs(5);

/// The API routes, plus the UI bundle at `/` when `ui_dir` is given.
pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let limit = state.body_limit();
    let app = Router::new()
        .route("/api/transcribe", post(transcribe))
        .route("/api/identify", post(identify_route))
        .route("/api/flag", post(flag))
        .route("/api/models", get(models))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

struct Upload {
    bytes: Bytes,
    dialect_selection: Option<String>,
    min_confidence: Option<f64>,
}

fn rejection(status: StatusCode, message: String) -> ApiError {
    ApiError::new(status, Stage::Request, "BadRequest", message)
}

fn decode_b64(s: &str) -> Result<Bytes, ApiError> {
    STANDARD
        .decode(s)
        .map(Bytes::from)
        .map_err(|e| ApiError::bad_request("BadRequest", format!("audio_b64: {e}")))
}

/// Reads audio and form fields from a multipart body or, for any other
/// content type, a JSON body.
async fn read_upload(req: Request, state: &AppState, with_selection: bool) -> Result<Upload, ApiError> {
    let multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|ct| ct.starts_with("multipart/form-data"));

    if !multipart {
        return if with_selection {
            let Json(body) = Json::<TranscribeJsonRequest>::from_request(req, state)
                .await
                .map_err(|e| rejection(e.status(), e.body_text()))?;
            Ok(Upload {
                bytes: decode_b64(&body.audio_b64)?,
                dialect_selection: Some(body.dialect_selection),
                min_confidence: body.min_confidence,
            })
        } else {
            let Json(body) = Json::<IdentifyJsonRequest>::from_request(req, state)
                .await
                .map_err(|e| rejection(e.status(), e.body_text()))?;
            Ok(Upload {
                bytes: decode_b64(&body.audio_b64)?,
                dialect_selection: None,
                min_confidence: None,
            })
        };
    }

    let mut form = Multipart::from_request(req, state)
        .await
        .map_err(|e| rejection(e.status(), e.body_text()))?;
    let mut upload = Upload {
        bytes: Bytes::new(),
        dialect_selection: None,
        min_confidence: None,
    };
    let mut have_file = false;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| rejection(e.status(), e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "file" => {
                upload.bytes = field.bytes().await.map_err(|e| rejection(e.status(), e.body_text()))?;
                have_file = true;
            }
            "dialect_selection" | "min_confidence" => {
                let text = field.text().await.map_err(|e| rejection(e.status(), e.body_text()))?;
                if name == "dialect_selection" {
                    upload.dialect_selection = Some(text);
                } else if !text.trim().is_empty() {
                    let v = text.trim().parse().map_err(|_| {
                        ApiError::bad_request("InvalidMinConfidence", format!("min_confidence {text:?}"))
                    })?;
                    upload.min_confidence = Some(v);
                }
            }
            _ => {}
        }
    }
    if !have_file {
        return Err(ApiError::bad_request("BadRequest", "multipart body has no \"file\" field"));
    }
    Ok(upload)
}

async fn ingest_stage(state: &AppState, bytes: Bytes) -> Result<Ingested, ApiError> {
    let decoders = state.decoders.clone();
    let limits = state.limits;
    let job = tokio::task::spawn_blocking(move || ingest(&bytes, &decoders, &limits, CANONICAL_SAMPLE_RATE_HZ));
    let ingested = tokio::time::timeout(state.timeouts.ingest(), job)
        .await
        .map_err(|_| ApiError::stage_timeout(Stage::Ingest, None))?
        .map_err(|e| ApiError::internal(Stage::Ingest, e.to_string()))??;
    let seconds = ingested.buffer.duration_seconds();
    if seconds < MIN_DURATION_S {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            Stage::Ingest,
            "AudioTooShort",
            format!("{seconds:.3} s of audio, at least {MIN_DURATION_S} s required"),
        ));
    }
    Ok(ingested)
}

async fn blocking<T: Send + 'static>(
    stage: Stage,
    f: impl FnOnce() -> Result<T, dialectic_core::feedback::FeedbackError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(stage, e.to_string()))?
        .map_err(ApiError::from)
}

async fn transcribe(State(state): State<AppState>, req: Request) -> Result<Json<TranscribeResponse>, ApiError> {
    let upload = read_upload(req, &state, true).await?;
    let selection_text = upload.dialect_selection.as_deref().unwrap_or("auto");
    let selection: DialectSelection = selection_text
        .parse()
        .map_err(|_| ApiError::bad_request("InvalidDialect", format!("unknown dialect selection {selection_text:?}")))?;
    let min_confidence = upload.min_confidence.unwrap_or(state.min_confidence);
    if !(0.0..=1.0).contains(&min_confidence) {
        return Err(ApiError::bad_request(
            "InvalidMinConfidence",
            format!("min_confidence {min_confidence} outside [0, 1]"),
        ));
    }

    let bytes = upload.bytes;
    let ingested = ingest_stage(&state, bytes.clone()).await?;
    let audio = &ingested.buffer;

    let decision = tokio::time::timeout(
        state.timeouts.did(),
        route(selection, audio, &state.registry, state.did.as_ref(), min_confidence),
    )
    .await
    .map_err(|_| ApiError::stage_timeout(Stage::Did, Some(state.did.id())))??;

    let outcomes = state.asr.transcribe_selected(audio, &decision, state.timeouts.asr()).await;

    let mut results = Vec::with_capacity(outcomes.len());
    let mut stored = Vec::new();
    let mut first_failure = None;
    for (outcome, entry) in outcomes.into_iter().zip(&decision.selected_models) {
        match outcome.result {
            Ok(t) => {
                stored.push(ModelTranscript {
                    model_name: t.model_name.clone(),
                    raw_text: t.raw.clone(),
                });
                results.push(ModelResult::Ok(ModelTranscription {
                    model_name: t.model_name,
                    raw_text: t.raw,
                    normalized_text: t.normalized.into_string(),
                    latency_ms: t.latency_ms,
                }));
            }
            Err(e) => {
                let err = asr_failure(&e, &entry.backend.name);
                tracing::warn!(model = %outcome.model_name, error = %e, "model failed");
                results.push(ModelResult::Failed(ModelFailure {
                    model_name: outcome.model_name,
                    error: err.detail.clone(),
                }));
                first_failure.get_or_insert(err);
            }
        }
    }
    if stored.is_empty() {
        return Err(first_failure.unwrap_or_else(|| ApiError::internal(Stage::Asr, "no model selected")));
    }

    let did_top5 = decision.did_prediction.as_ref().map(|p| p.top_k(TOP_K).to_vec());
    let digest = content_digest(&bytes);
    if let Some(blobs) = state.blobs.clone() {
        let (digest, ext) = (digest.clone(), ingested.format.container.extension());
        blocking(Stage::Store, move || blobs.put(&digest, ext, &bytes)).await?;
    }
    let event = TranscriptionEvent::new(
        digest,
        decision.dialect_used,
        decision.source,
        did_top5.clone(),
        stored,
    )?;
    let store = state.store.clone();
    let event_id = blocking(Stage::Store, move || store.record_event(event)).await?;

    Ok(Json(TranscribeResponse {
        event_id,
        dialect_used: decision.dialect_used,
        source: decision.source,
        did_top5,
        min_confidence_met: decision.min_confidence_met,
        results,
    }))
}

async fn identify_route(State(state): State<AppState>, req: Request) -> Result<Json<IdentifyResponse>, ApiError> {
    let upload = read_upload(req, &state, false).await?;
    let ingested = ingest_stage(&state, upload.bytes).await?;
    let prediction = tokio::time::timeout(state.timeouts.did(), identify(&ingested.buffer, state.did.as_ref()))
        .await
        .map_err(|_| ApiError::stage_timeout(Stage::Did, Some(state.did.id())))??;
    Ok(Json(IdentifyResponse::from(&prediction)))
}

async fn flag(State(state): State<AppState>, req: Request) -> Result<StatusCode, ApiError> {
    let Json(body) = Json::<FlagRequest>::from_request(req, &state)
        .await
        .map_err(|e| rejection(e.status(), e.body_text()))?;
    let store = state.store.clone();
    blocking(Stage::Store, move || store.flag(body.event_id, body.model_name.as_deref())).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    Json(state.registry.entries().iter().map(ModelInfo::from).collect())
}

async fn probe<F: std::future::Future<Output = dialectic_core::remote::BackendHealth>>(
    name: String,
    health: F,
) -> ComponentHealth {
    match tokio::time::timeout(PROBE_TIMEOUT, health).await {
        Ok(h) => ComponentHealth {
            name,
            reachable: h.reachable,
            detail: h.detail,
        },
        Err(_) => ComponentHealth {
            name,
            reachable: false,
            detail: Some("health probe timed out".into()),
        },
    }
}

/// `ok` when every backend answers and the store is writable, `degraded`
/// when a backend is unreachable, `failing` (HTTP 503) when the store
/// cannot be written.
async fn health(State(state): State<AppState>) -> (StatusCode, Json<HealthResponse>) {
    let mut asr: Vec<_> = state.asr.iter().map(|(_, b)| b.clone()).collect();
    asr.sort_by(|a, b| a.name().cmp(b.name()));
    asr.dedup_by(|a, b| a.name() == b.name());

    let did_probe = probe(state.did.id().to_string(), state.did.health());
    let asr_probes = join_all(asr.iter().map(|b| probe(b.name().to_string(), b.health())));
    let (did, asr) = futures::join!(did_probe, asr_probes);
    let mut backends = vec![did];
    backends.extend(asr);

    let store_path = state.store.path().display().to_string();
    let store = match state.store.check_writable() {
        Ok(()) => ComponentHealth {
            name: store_path,
            reachable: true,
            detail: None,
        },
        Err(e) => ComponentHealth {
            name: store_path,
            reachable: false,
            detail: Some(e.to_string()),
        },
    };

    let status = if !store.reachable {
        HealthStatus::Failing
    } else if backends.iter().any(|b| !b.reachable) {
        HealthStatus::Degraded
    } else {
        HealthStatus::Ok
    };
    let code = match status {
        HealthStatus::Failing => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::OK,
    };
    (code, Json(HealthResponse { status, backends, store }))
}
