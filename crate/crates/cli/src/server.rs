//! HTTP capture endpoint for self-reports.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Local;
use domhand::contextlog::{rejection_code, AppendOutcome, ContextLog, ContextSubmission};
use domhand::ingest::ContextEntry;
use domhand::vocab::AROUSAL_LEVELS;
use domhand::WearFlag;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RECENT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabResponse {
    pub locations: Vec<String>,
    pub activities: Vec<String>,
    pub arousal_levels: Vec<u8>,
    pub wear_flags: Vec<String>,
    pub max_selections: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Deserialize)]
pub struct RecentQuery {
    pub n: Option<usize>,
}

fn reject(status: StatusCode, code: &str, message: String) -> Response {
    (
        status,
        Json(ErrorResponse {
            error: code.to_string(),
            message,
        }),
    )
        .into_response()
}

pub fn router(log: Arc<ContextLog>) -> Router {
    Router::new()
        .route("/entries", post(post_entry))
        .route("/entries/recent", get(recent_entries))
        .route("/vocab", get(vocab))
        .with_state(log)
}

async fn post_entry(State(log): State<Arc<ContextLog>>, body: Result<Json<ContextSubmission>, JsonRejection>) -> Response {
    let received = Local::now().naive_local();
    let sub = match body {
        Ok(Json(s)) => s,
        Err(e) => return reject(StatusCode::BAD_REQUEST, "malformed_payload", e.body_text()),
    };
    let entry = sub.into_entry(received);
    let appended = tokio::task::spawn_blocking(move || log.append(entry)).await;
    match appended {
        Ok(Ok(outcome @ AppendOutcome::Appended { .. })) => (StatusCode::CREATED, Json(outcome)).into_response(),
        Ok(Ok(outcome @ AppendOutcome::Duplicate { .. })) => (StatusCode::OK, Json(outcome)).into_response(),
        Ok(Err(e)) if e.is_io() => reject(StatusCode::INTERNAL_SERVER_ERROR, rejection_code(&e), e.to_string()),
        Ok(Err(e)) => reject(StatusCode::UNPROCESSABLE_ENTITY, rejection_code(&e), e.to_string()),
        Err(e) => reject(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

async fn recent_entries(State(log): State<Arc<ContextLog>>, Query(q): Query<RecentQuery>) -> Json<Vec<ContextEntry>> {
    Json(log.recent(q.n.unwrap_or(DEFAULT_RECENT)))
}

async fn vocab(State(log): State<Arc<ContextLog>>) -> Json<VocabResponse> {
    let v = log.vocab();
    Json(VocabResponse {
        locations: v.locations.clone(),
        activities: v.activities.clone(),
        arousal_levels: AROUSAL_LEVELS.collect(),
        wear_flags: [WearFlag::Removed, WearFlag::Worn].iter().map(|f| f.as_str().to_string()).collect(),
        max_selections: 4,
    })
}

/// Serves until interrupted.
pub async fn serve(log: Arc<ContextLog>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("capture endpoint listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(log))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
