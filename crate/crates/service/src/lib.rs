//! HTTP inference API.
//!
//! * `POST /segment` — segment a base64 PNG against an ordered label list.
//! * `GET /vocabulary` — labels known to the loaded embedding table, sorted.
//! * `GET /health` — liveness plus checkpoint and table digests.
//!
//! The model and table are loaded once and shared read-only by every
//! request; handlers keep no state between requests, so identical requests
//! get byte-identical bodies. Elapsed time is reported in a `Server-Timing`
//! header (and in the body only on request) for that reason.

mod api;
mod error;
mod state;

pub use api::{
    label_color, LegendEntry, ScoreSummary, SegmentOptions, SegmentRequest, SegmentResponse,
    MAX_IMAGE_SIDE, MAX_REQUEST_BYTES,
};
pub use error::ServiceError;
pub use state::ServiceState;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;

/// The full application with its routes.
pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/segment", post(api::segment))
        .route("/vocabulary", get(api::vocabulary))
        .route("/health", get(api::health))
        .layer(DefaultBodyLimit::max(MAX_REQUEST_BYTES))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr) -> std::io::Result<()> {
    serve_on(state, tokio::net::TcpListener::bind(addr).await?).await
}

/// [`serve`] on an already bound listener (e.g. port 0 in tests).
pub async fn serve_on(state: Arc<ServiceState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
