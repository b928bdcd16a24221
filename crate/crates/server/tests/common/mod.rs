#![allow(dead_code)]

use std::f32::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use dialectic_client::Client;
use dialectic_core::audio::{encode_wav_pcm16, AudioBuffer};
use dialectic_core::did::DidBackend;
use dialectic_core::feedback::FeedbackStore;
use dialectic_core::routing::ModelRegistry;
use dialectic_server::{router, AppState};

/// PCM16 WAV of a sine tone.
pub fn tone_wav(rate: u32, seconds: f32, freq: f32) -> Vec<u8> {
    let n = (rate as f32 * seconds) as usize;
    let samples = (0..n).map(|i| 0.5 * (TAU * freq * i as f32 / rate as f32).sin()).collect();
    encode_wav_pcm16(&AudioBuffer::new(samples, rate).unwrap())
}

pub fn state(dir: &Path, did: Arc<dyn DidBackend>) -> AppState {
    let store = FeedbackStore::open(dir.join("store.jsonl")).unwrap();
    AppState::new(ModelRegistry::default_registry(), did, store)
}

/// Serves `state` on an ephemeral port.
pub async fn spawn(state: AppState) -> Client {
    spawn_router(router(state, None)).await
}

pub async fn spawn_router(app: axum::Router) -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Client::new(&format!("http://{addr}")).unwrap()
}
