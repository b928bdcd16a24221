mod common;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::http::StatusCode;
use common::{spawn, spawn_router, state, tone_wav};
use dialectic_client::{ClientError, Upload};
use dialectic_core::api::{HealthStatus, ModelResult, Stage};
use dialectic_core::arabic_text::normalize_default;
use dialectic_core::asr::{AsrBackend, AsrError};
use dialectic_core::audio::AudioBuffer;
use dialectic_core::did::{MockDidBackend, RemoteDidBackend};
use dialectic_core::feedback::{content_digest, FeedbackStore};
use dialectic_core::routing::{ModelRegistry, RoutingSource};
use dialectic_core::{DialectLabel, DialectUsed};
use dialectic_server::{router, AppState, ServiceConfig, StartupError};
use uuid::Uuid;

const GENERIC: [&str; 2] = ["Whisper Zero-shot", "MMS"];

fn names(results: &[ModelResult]) -> Vec<&str> {
    results.iter().map(ModelResult::model_name).collect()
}

fn api_error(e: ClientError) -> (StatusCode, dialectic_core::api::ErrorDetail) {
    match e {
        ClientError::Api { status, error } => (status, error),
        other => panic!("expected an API error, got {other}"),
    }
}

struct Failing;

#[async_trait]
impl AsrBackend for Failing {
    fn name(&self) -> &str {
        "broken"
    }

    async fn transcribe_raw(&self, _: &AudioBuffer) -> Result<String, AsrError> {
        Err(AsrError::BackendUnavailable {
            backend: "broken".into(),
            reason: "connection refused".into(),
        })
    }
}

struct Slow;

#[async_trait]
impl AsrBackend for Slow {
    fn name(&self) -> &str {
        "slow"
    }

    async fn transcribe_raw(&self, _: &AudioBuffer) -> Result<String, AsrError> {
        tokio::time::sleep(Duration::from_secs(5)).await;
        Ok("متأخر".into())
    }
}

#[tokio::test]
async fn manual_covered_dialect_uses_its_model_only() {
    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::uniform()))).await;
    let resp = client
        .transcribe(tone_wav(48_000, 1.0, 440.0), "a.wav", "EGY", None, Upload::Multipart)
        .await
        .unwrap();
    assert_eq!(names(&resp.results), ["Whisper Egypt"]);
    assert_eq!(resp.source, RoutingSource::Manual);
    assert_eq!(resp.dialect_used, DialectUsed::Dialect(DialectLabel::Egy));
    assert!(resp.did_top5.is_none());
    let t = resp.results[0].transcription().unwrap();
    assert_eq!(t.normalized_text, normalize_default(&t.raw_text).as_str());
    assert!(t.raw_text.starts_with("مساء الخير اهلا ومرحبا بيكم"));
}

#[tokio::test]
async fn auto_routes_by_identified_dialect() {
    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::pinned(DialectLabel::Jor, 0.9)))).await;
    let resp = client
        .transcribe(tone_wav(16_000, 1.0, 300.0), "a.wav", "auto", None, Upload::Multipart)
        .await
        .unwrap();
    assert_eq!(names(&resp.results), GENERIC);
    assert_eq!(resp.source, RoutingSource::Fallback);
    let top5 = resp.did_top5.unwrap();
    assert_eq!(top5.len(), 5);
    assert_eq!(top5[0].label, DialectLabel::Jor);

    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::pinned(DialectLabel::Egy, 0.9)))).await;
    let resp = client
        .transcribe(tone_wav(16_000, 1.0, 300.0), "a.wav", "auto", Some(0.5), Upload::Base64Json)
        .await
        .unwrap();
    assert_eq!(names(&resp.results), ["Whisper Egypt"]);
    assert_eq!(resp.source, RoutingSource::AutoDid);
    assert!(resp.min_confidence_met);

    let resp = client
        .transcribe(tone_wav(16_000, 1.0, 300.0), "a.wav", "auto", Some(0.95), Upload::Multipart)
        .await
        .unwrap();
    assert_eq!(names(&resp.results), GENERIC);
    assert!(!resp.min_confidence_met);
}

#[tokio::test]
async fn other_and_uncovered_manual_use_generic_models_with_identification() {
    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::pinned(DialectLabel::Ksa, 0.7)))).await;
    for (selection, used) in [("other", DialectUsed::Other), ("jor", DialectUsed::Dialect(DialectLabel::Jor))] {
        let resp = client
            .transcribe(tone_wav(22_050, 0.5, 200.0), "a.wav", selection, None, Upload::Multipart)
            .await
            .unwrap();
        assert_eq!(names(&resp.results), GENERIC);
        assert_eq!(resp.source, RoutingSource::Fallback);
        assert_eq!(resp.dialect_used, used);
        assert_eq!(resp.did_top5.unwrap()[0].label, DialectLabel::Ksa);
    }
}

#[tokio::test]
async fn request_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut st = state(dir.path(), Arc::new(MockDidBackend::uniform()));
    st.limits.max_payload_bytes = 64 * 1024;
    let client = spawn(st).await;
    let wav = tone_wav(16_000, 0.5, 440.0);

    let (status, e) = api_error(client.transcribe(wav.clone(), "a.wav", "XYZ", None, Upload::Multipart).await.unwrap_err());
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(e.kind, "InvalidDialect");

    let (status, e) = api_error(client.transcribe(b"hello world, not audio".to_vec(), "a.txt", "auto", None, Upload::Multipart).await.unwrap_err());
    assert_eq!((status, e.kind.as_str(), e.stage), (StatusCode::BAD_REQUEST, "UnrecognizedFormat", Stage::Ingest));

    let (status, e) = api_error(client.transcribe(wav[..8].to_vec(), "a.wav", "auto", None, Upload::Multipart).await.unwrap_err());
    assert_eq!((status, e.kind.as_str()), (StatusCode::BAD_REQUEST, "TruncatedHeader"));

    let header_only = wav[..44].to_vec();
    let (status, e) = api_error(client.transcribe(header_only, "a.wav", "auto", None, Upload::Multipart).await.unwrap_err());
    assert_eq!((status, e.kind.as_str()), (StatusCode::BAD_REQUEST, "EmptyAudio"));

    let big = tone_wav(16_000, 3.0, 440.0);
    for upload in [Upload::Multipart, Upload::Base64Json] {
        let err = client.transcribe(big.clone(), "a.wav", "auto", None, upload).await.unwrap_err();
        assert_eq!(err.status(), Some(StatusCode::PAYLOAD_TOO_LARGE));
    }

    let (status, e) = api_error(client.transcribe(wav.clone(), "a.wav", "auto", Some(2.0), Upload::Multipart).await.unwrap_err());
    assert_eq!((status, e.kind.as_str()), (StatusCode::BAD_REQUEST, "InvalidMinConfidence"));

    let (status, e) = api_error(client.transcribe(tone_wav(16_000, 0.01, 440.0), "a.wav", "EGY", None, Upload::Multipart).await.unwrap_err());
    assert_eq!((status, e.kind.as_str()), (StatusCode::BAD_REQUEST, "AudioTooShort"));
}

#[tokio::test]
async fn identify_returns_top5_and_full_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::uniform()))).await;
    let r = client.identify(tone_wav(16_000, 1.0, 440.0), "a.wav", Upload::Multipart).await.unwrap();
    let labels: Vec<_> = r.top5.iter().map(|p| p.label).collect();
    assert_eq!(labels, &DialectLabel::ALL[..5]);
    assert!(r.top5.iter().all(|p| (p.probability - 1.0 / 18.0).abs() < 1e-12));
    assert_eq!(r.full.len(), 18);

    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::pinned(DialectLabel::Egy, 0.9)))).await;
    let r = client.identify(tone_wav(8_000, 1.0, 440.0), "a.wav", Upload::Base64Json).await.unwrap();
    assert_eq!(r.top5[0].label, DialectLabel::Egy);
    assert!((r.top5[0].probability - 0.9).abs() < 1e-12);

    let (status, _) = api_error(client.identify(b"\x00\x01\x02\x03".to_vec(), "x", Upload::Multipart).await.unwrap_err());
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn flags_exclude_events_from_export() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), Arc::new(MockDidBackend::uniform()));
    let store = st.store.clone();
    let client = spawn(st).await;
    let wav = tone_wav(16_000, 1.0, 440.0);

    let a = client.transcribe(wav.clone(), "a.wav", "EGY", None, Upload::Multipart).await.unwrap();
    let b = client.transcribe(wav.clone(), "a.wav", "other", None, Upload::Multipart).await.unwrap();
    assert_eq!(store.len(), 2);
    let ev = store.get(a.event_id).unwrap();
    assert_eq!(ev.audio_sha256, content_digest(&wav));
    assert_eq!(ev.transcripts.len(), 1);

    client.flag(a.event_id, None).await.unwrap();
    client.flag(a.event_id, None).await.unwrap();
    // a flag on the second generic model leaves the first one's transcript exportable
    client.flag(b.event_id, Some("MMS")).await.unwrap();
    let export = store.export_silver();
    assert_eq!(export.len(), 1);
    assert_eq!(export[0].model_name, "Whisper Zero-shot");

    let (status, e) = api_error(client.flag(Uuid::new_v4(), None).await.unwrap_err());
    assert_eq!((status, e.kind.as_str()), (StatusCode::NOT_FOUND, "UnknownEvent"));
    let (status, e) = api_error(client.flag(b.event_id, Some("Whisper Egypt")).await.unwrap_err());
    assert_eq!((status, e.kind.as_str()), (StatusCode::NOT_FOUND, "UnknownModel"));

    let text = std::fs::read_to_string(dir.path().join("store.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[tokio::test]
async fn models_lists_the_registry() {
    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::uniform()))).await;
    let models = client.models().await.unwrap();
    let listed: Vec<_> = models.iter().map(|m| m.model_name.as_str()).collect();
    assert_eq!(
        listed,
        ["Whisper MSA", "XLS-R", "Whisper Morocco", "Whisper Egypt", "Whisper Zero-shot", "MMS"]
    );
    assert!(models[4].dialects.is_empty() && models[5].dialects.is_empty());
    assert_eq!(models[3].dataset, "MGB3");
}

#[tokio::test]
async fn health_reports_backends_and_store() {
    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::uniform()))).await;
    let h = client.health().await.unwrap();
    assert_eq!(h.status, HealthStatus::Ok);
    assert_eq!(h.backends.len(), 7);

    let dir = tempfile::tempdir().unwrap();
    let remote = RemoteDidBackend::new("http://127.0.0.1:9", Duration::from_secs(2), 1);
    let client = spawn(state(dir.path(), Arc::new(remote))).await;
    let h = client.health().await.unwrap();
    assert_eq!(h.status, HealthStatus::Degraded);
    let down: Vec<_> = h.backends.iter().filter(|b| !b.reachable).collect();
    assert_eq!(down.len(), 1);
    assert!(down[0].name.contains("127.0.0.1:9"));

    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("store");
    std::fs::create_dir(&sub).unwrap();
    let client = spawn(state(&sub, Arc::new(MockDidBackend::uniform()))).await;
    std::fs::remove_dir_all(&sub).unwrap();
    let h = client.health().await.unwrap();
    assert_eq!(h.status, HealthStatus::Failing);
    assert!(!h.store.reachable);
}

#[tokio::test]
async fn backend_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut st = state(dir.path(), Arc::new(MockDidBackend::uniform()));
    st.asr.insert("MMS", Arc::new(Failing));
    let client = spawn(st.clone()).await;
    let wav = tone_wav(16_000, 1.0, 440.0);

    let resp = client.transcribe(wav.clone(), "a.wav", "other", None, Upload::Multipart).await.unwrap();
    assert!(resp.results[0].transcription().is_some());
    match &resp.results[1] {
        ModelResult::Failed(f) => {
            assert_eq!(f.model_name, "MMS");
            assert_eq!(f.error.kind, "BackendUnavailable");
            assert_eq!(f.error.backend.as_deref(), Some("mms-zero-shot"));
        }
        ok => panic!("expected a failure, got {ok:?}"),
    }
    assert_eq!(st.store.get(resp.event_id).unwrap().transcripts.len(), 1);

    st.asr.insert("Whisper Zero-shot", Arc::new(Slow));
    st.timeouts.asr_s = 0.2;
    let events_before = st.store.len();
    let client = spawn(st.clone()).await;
    let (status, e) = api_error(client.transcribe(wav.clone(), "a.wav", "other", None, Upload::Multipart).await.unwrap_err());
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(e.stage, Stage::Asr);
    assert_eq!(e.kind, "BackendTimeout");
    assert_eq!(e.backend.as_deref(), Some("whisper-zero-shot"));
    assert_eq!(st.store.len(), events_before);

    let dir = tempfile::tempdir().unwrap();
    let remote = RemoteDidBackend::new("http://127.0.0.1:9", Duration::from_secs(2), 1);
    let client = spawn(state(dir.path(), Arc::new(remote))).await;
    let (status, e) = api_error(client.transcribe(wav.clone(), "a.wav", "auto", None, Upload::Multipart).await.unwrap_err());
    assert_eq!((status, e.stage), (StatusCode::BAD_GATEWAY, Stage::Did));
    assert!(e.backend.unwrap().contains("127.0.0.1:9"));
    // a manual covered choice never calls the identifier
    client.transcribe(wav, "a.wav", "MOR", None, Upload::Multipart).await.unwrap();
}

#[tokio::test]
async fn concurrent_requests_get_distinct_events() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(dir.path(), Arc::new(MockDidBackend::content_hash()));
    let store = st.store.clone();
    let client = spawn(st).await;
    let wav = tone_wav(16_000, 1.0, 440.0);
    let calls = (0..16).map(|_| client.transcribe(wav.clone(), "a.wav", "auto", None, Upload::Multipart));
    let responses: Vec<_> = futures::future::join_all(calls).await.into_iter().map(Result::unwrap).collect();
    let ids: std::collections::HashSet<_> = responses.iter().map(|r| r.event_id).collect();
    assert_eq!(ids.len(), 16);
    let texts = |r: &dialectic_core::api::TranscribeResponse| -> Vec<String> {
        r.results.iter().filter_map(|x| x.transcription().map(|t| t.raw_text.clone())).collect()
    };
    assert!(responses.iter().all(|r| texts(r) == texts(&responses[0])));
    assert_eq!(store.len(), 16);
    let reopened = FeedbackStore::open(store.path()).unwrap();
    assert_eq!(reopened.len(), 16);
}

#[tokio::test]
async fn origin_metadata_is_not_stored() {
    let dir = tempfile::tempdir().unwrap();
    let client = spawn(state(dir.path(), Arc::new(MockDidBackend::uniform()))).await;
    let form = reqwest::multipart::Form::new()
        .part("file", reqwest::multipart::Part::bytes(tone_wav(16_000, 1.0, 440.0)).file_name("secret-name.wav"))
        .text("dialect_selection", "EGY");
    let resp = reqwest::Client::new()
        .post(format!("{}/api/transcribe", client.base_url()))
        .header("User-Agent", "agent-marker-7f3a")
        .header("X-Forwarded-For", "198.51.100.23")
        .multipart(form)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = resp.text().await.unwrap();
    let stored = std::fs::read_to_string(dir.path().join("store.jsonl")).unwrap();
    for marker in ["agent-marker-7f3a", "198.51.100.23", "127.0.0.1", "secret-name"] {
        assert!(!body.contains(marker), "{marker} in response");
        assert!(!stored.contains(marker), "{marker} in store");
    }
}

#[tokio::test]
async fn blob_dir_keeps_uploads_by_digest() {
    let dir = tempfile::tempdir().unwrap();
    let mut st = state(dir.path(), Arc::new(MockDidBackend::uniform()));
    st.blobs = Some(dialectic_core::feedback::AudioBlobStore::new(dir.path().join("audio")).unwrap());
    let client = spawn(st).await;
    let wav = tone_wav(16_000, 1.0, 440.0);
    client.transcribe(wav.clone(), "a.wav", "EGY", None, Upload::Multipart).await.unwrap();
    let path = dir.path().join("audio").join(format!("{}.wav", content_digest(&wav)));
    assert_eq!(std::fs::read(path).unwrap(), wav);
}

#[tokio::test]
async fn serves_ui_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<!doctype html><title>ui</title>").unwrap();
    let app = router(state(dir.path(), Arc::new(MockDidBackend::uniform())), Some(&ui));
    let client = spawn_router(app).await;
    let page = reqwest::get(format!("{}/", client.base_url())).await.unwrap();
    assert_eq!(page.status(), StatusCode::OK);
    assert!(page.text().await.unwrap().contains("<title>ui</title>"));
    assert_eq!(client.models().await.unwrap().len(), 6);
}

#[test]
fn refuses_registry_without_generic_models() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("registry.toml");
    std::fs::write(
        &reg,
        r#"
        [[models]]
        model_name = "Whisper Egypt"
        dialects = ["EGY"]
        dataset = "MGB3"
        architecture = "WHISPER"
        backend = { name = "whisper-egypt", kind = "MOCK" }
        "#,
    )
    .unwrap();
    let cfg = ServiceConfig {
        registry: Some(reg),
        store: dir.path().join("s.jsonl"),
        ..Default::default()
    };
    assert!(matches!(AppState::from_config(&cfg), Err(StartupError::Registry(_))));
}

#[test]
fn shipped_config_files_load() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config");
    let reg = ModelRegistry::load(&root.join("registry.toml")).unwrap();
    assert_eq!(reg, ModelRegistry::default_registry());

    let text = std::fs::read_to_string(root.join("dialectic.toml")).unwrap();
    let mut cfg = ServiceConfig::from_toml_str(&text).unwrap();
    cfg.resolve_relative_to(&root);
    let dir = tempfile::tempdir().unwrap();
    cfg.store = dir.path().join("s.jsonl");
    let st = AppState::from_config(&cfg).unwrap();
    assert_eq!(st.registry.entries().len(), 6);
}
