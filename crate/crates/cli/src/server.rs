use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use divr_core::diversity::DiversityScorer;
use divr_core::scoring::{serve_score_json, ScoreError};
use serde_json::json;

pub fn router(scorer: DiversityScorer) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/health", get(health))
        .with_state(Arc::new(scorer))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn score(State(scorer): State<Arc<DiversityScorer>>, body: Bytes) -> Response {
    let result = tokio::task::spawn_blocking(move || serve_score_json(&body, &scorer))
        .await
        .unwrap_or_else(|e| Err(ScoreError::Internal(e.to_string())));
    match result {
        Ok(resp) => (StatusCode::OK, Json(resp)).into_response(),
        Err(e) => {
            let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, Json(json!({ "error": e.to_string() }))).into_response()
        }
    }
}

/// Blocks serving until ctrl-c.
pub fn serve(addr: SocketAddr, scorer: DiversityScorer) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        eprintln!("serving on http://{}", listener.local_addr()?);
        axum::serve(listener, router(scorer))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
