use axum::extract::Multipart;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use dialectic_client::{Client, ClientError, Upload};
use dialectic_core::api::{HealthStatus, Stage};
use serde_json::{json, Value};

async fn serve(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/")
}

fn response_for(selection: &str, audio_len: usize) -> Value {
    json!({
        "event_id": "67e55044-10b1-426f-9247-bb680e5fe0c8",
        "dialect_used": "EGY",
        "source": "MANUAL",
        "did_top5": null,
        "min_confidence_met": true,
        "results": [
            { "model_name": selection, "raw_text": audio_len.to_string(), "normalized_text": audio_len.to_string(), "latency_ms": 1 },
            { "model_name": "MMS", "error": { "kind": "BackendTimeout", "message": "slow", "stage": "asr", "backend": "mms" } }
        ]
    })
}

async fn echo_multipart(mut form: Multipart) -> Json<Value> {
    let (mut selection, mut len) = (String::new(), 0);
    while let Some(f) = form.next_field().await.unwrap() {
        match f.name() {
            Some("file") => {
                assert_eq!(f.file_name(), Some("clip.wav"));
                len = f.bytes().await.unwrap().len();
            }
            Some("dialect_selection") => selection = f.text().await.unwrap(),
            Some("min_confidence") => assert_eq!(f.text().await.unwrap(), "0.25"),
            other => panic!("unexpected field {other:?}"),
        }
    }
    Json(response_for(&selection, len))
}

#[tokio::test]
async fn transcribe_both_upload_forms() {
    let app = Router::new()
        .route("/m/api/transcribe", post(echo_multipart))
        .route(
            "/j/api/transcribe",
            post(|Json(body): Json<Value>| async move {
                assert_eq!(body["audio_b64"], "AAEC");
                Json(response_for(body["dialect_selection"].as_str().unwrap(), 3))
            }),
        );
    let base = serve(app).await;

    let c = Client::new(&format!("{base}m/")).unwrap();
    let r = c.transcribe(vec![0, 1, 2, 3], "clip.wav", "EGY", Some(0.25), Upload::Multipart).await.unwrap();
    assert_eq!(r.results[0].model_name(), "EGY");
    assert_eq!(r.results[0].transcription().unwrap().raw_text, "4");
    assert!(r.results[1].transcription().is_none());

    let c = Client::new(&format!("{base}j")).unwrap();
    let r = c.transcribe(vec![0, 1, 2], "clip.wav", "auto", None, Upload::Base64Json).await.unwrap();
    assert_eq!(r.results[0].model_name(), "auto");
}

#[tokio::test]
async fn error_bodies() {
    let app = Router::new()
        .route(
            "/api/flag",
            post(|| async {
                (
                    StatusCode::NOT_FOUND,
                    Json(json!({ "error": { "kind": "UnknownEvent", "message": "unknown event", "stage": "store" } })),
                )
            }),
        )
        .route("/api/models", get(|| async { (StatusCode::BAD_GATEWAY, "upstream down") }))
        .route(
            "/health",
            get(|| async {
                (
                    StatusCode::SERVICE_UNAVAILABLE,
                    Json(json!({
                        "status": "failing",
                        "backends": [{ "name": "mock-did", "reachable": true }],
                        "store": { "name": "/x", "reachable": false, "detail": "gone" }
                    })),
                )
            }),
        );
    let c = Client::new(&serve(app).await).unwrap();

    match c.flag(uuid::Uuid::nil(), None).await.unwrap_err() {
        ClientError::Api { status, error } => {
            assert_eq!(status, StatusCode::NOT_FOUND);
            assert_eq!(error.kind, "UnknownEvent");
            assert_eq!(error.stage, Stage::Store);
        }
        other => panic!("{other}"),
    }
    let err = c.models().await.unwrap_err();
    assert!(matches!(err, ClientError::Unexpected { .. }));
    assert_eq!(err.status(), Some(StatusCode::BAD_GATEWAY));

    let h = c.health().await.unwrap();
    assert_eq!(h.status, HealthStatus::Failing);
    assert!(!h.store.reachable);
}

#[tokio::test]
async fn unreachable_service() {
    let c = Client::new("http://127.0.0.1:9").unwrap();
    assert!(matches!(c.models().await.unwrap_err(), ClientError::Http(_)));
}
