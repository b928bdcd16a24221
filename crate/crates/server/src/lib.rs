//! HTTP service: ingestion, dialect identification, routing, transcription
//! and feedback behind a JSON API.
//!
//! | route | body | answer |
//! |---|---|---|
//! | `POST /api/transcribe` | multipart `file` (+ `dialect_selection`, `min_confidence`) or JSON `{audio_b64, dialect_selection, min_confidence}` | `TranscribeResponse` |
//! | `POST /api/identify` | multipart `file` or JSON `{audio_b64}` | `{top5, full, backend_id}` |
//! | `POST /api/flag` | `{event_id, model_name?}` | 204, or 404 for an unknown event |
//! | `GET /api/models` | | registry listing |
//! | `GET /health` | | `{status, backends, store}` |
//!
//! Errors carry `{"error": {kind, message, stage, backend?}}`. Ingestion
//! problems are 400 (415 for a recognized but undecodable encoding, 413 for
//! size or duration limits); backend failures and exceeded time budgets are
//! 502 naming the stage and backend.

pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use tokio::net::TcpListener;

pub use config::ServiceConfig;
pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, StartupError};

/// Builds the state from `cfg`, binds and serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> Result<(), StartupError> {
    let state = AppState::from_config(&cfg)?;
    let app = router(state, cfg.ui_dir.as_deref());
    let listener = TcpListener::bind(cfg.listen).await.map_err(|source| StartupError::Bind {
        addr: cfg.listen,
        source,
    })?;
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(StartupError::Serve)
}
