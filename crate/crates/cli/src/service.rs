//! Read-only HTTP prediction service and its frame feed.
//!
//! `GET /predict?steps=N` forecasts from the newest buffered ticks;
//! `GET /health` reports the buffer fill. Frames arrive as
//! `step_index,<lot_id...>` CSV lines whose step index counts ticks from
//! the checkpoint's series epoch.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use parkcast_core::data::{check_frame_header, parse_frame_fields};
use parkcast_core::preprocess::normalize;
use serde_json::json;
use tokio::io::{AsyncBufRead, AsyncBufReadExt};

use crate::buffer::{Pushed, RollingBuffer};
use crate::error::AppResult;
use crate::forecast::{PredictError, Predictor};

#[derive(Debug)]
pub struct AppState {
    pub predictor: Predictor,
    pub buffer: RollingBuffer,
}

impl AppState {
    pub fn new(predictor: Predictor) -> Arc<Self> {
        Arc::new(Self {
            predictor,
            buffer: RollingBuffer::new(),
        })
    }

    /// Normalizes one frame line and appends it to the buffer.
    pub fn ingest_line(&self, line: &str) -> parkcast_core::Result<Pushed> {
        let map = &self.predictor.checkpoint.map;
        let frame = parse_frame_fields(line.split(','), map.lot_ids.len())?;
        let v = normalize(std::slice::from_ref(&frame), map)?.remove(0);
        Ok(self.buffer.push(v))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/predict", get(predict))
        .route("/health", get(health))
        .with_state(state)
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

async fn predict(State(state): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let steps = match q.get("steps").map(|s| s.parse::<usize>()) {
        Some(Ok(n)) => n,
        Some(Err(_)) => return error(StatusCode::BAD_REQUEST, json!({"error": "steps must be a non-negative integer"})),
        None => return error(StatusCode::BAD_REQUEST, json!({"error": "missing query parameter steps"})),
    };
    let snapshot = state.buffer.snapshot();
    let worker = Arc::clone(&state);
    let result = tokio::task::spawn_blocking(move || worker.predictor.predict(&snapshot, steps)).await;
    match result {
        Ok(Ok(p)) => Json(p).into_response(),
        Ok(Err(e @ PredictError::Steps(_))) => error(StatusCode::BAD_REQUEST, json!({"error": e.to_string()})),
        Ok(Err(e @ PredictError::Warming { have, .. })) => error(
            StatusCode::SERVICE_UNAVAILABLE,
            json!({"status": "warming", "buffer_steps": have, "error": e.to_string()}),
        ),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, json!({"error": e.to_string()})),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, json!({"error": e.to_string()})),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let n = state.buffer.snapshot().len();
    let status = if n >= state.predictor.history_len() { "ready" } else { "warming" };
    Json(json!({"status": status, "buffer_steps": n, "model": state.predictor.model_id}))
}

/// Feeds frame lines into the buffer until the source ends. With
/// `follow`, end of input is treated as "no data yet" and polled.
pub async fn run_feed<R: AsyncBufRead + Unpin>(state: Arc<AppState>, mut reader: R, follow: bool) -> AppResult<()> {
    let mut line = String::new();
    let mut header_seen = false;
    loop {
        let n = reader.read_line(&mut line).await?;
        if n == 0 && follow {
            tokio::time::sleep(Duration::from_millis(250)).await;
            continue;
        }
        if n == 0 && line.is_empty() {
            return Ok(());
        }
        if n > 0 && !line.ends_with('\n') && follow {
            // partial line; wait for the writer to finish it
            continue;
        }
        let text = line.trim();
        if !text.is_empty() {
            if !header_seen {
                check_frame_header(text.split(','), &state.predictor.checkpoint.map.lot_ids)?;
                header_seen = true;
            } else {
                match state.ingest_line(text) {
                    Ok(Pushed::Reset) => log::warn!("gap in frame feed; buffer restarted"),
                    Ok(Pushed::Stale) => log::warn!("dropped out-of-order frame"),
                    Ok(Pushed::Appended) => {}
                    Err(e) => log::warn!("skipping frame: {e}"),
                }
            }
        }
        line.clear();
        if n == 0 {
            return Ok(());
        }
    }
}
