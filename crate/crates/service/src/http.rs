use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::{ServeDir, ServeFile};

use tagforge_core::RelevanceMark;

use crate::store::{MarkOutcome, SurveyStore};

const PLACEHOLDER_PAGE: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>tagforge survey</title></head>
<body>
<h1>tagforge survey</h1>
<p>No annotator bundle is installed. Start the server with <code>--ui &lt;dir&gt;</code>
to serve one, or use the JSON API under <code>/api/</code>.</p>
</body></html>
";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SurveyStore>,
}

#[derive(Deserialize)]
struct NextParams {
    #[serde(default)]
    user: String,
}

#[derive(Serialize)]
struct WireSuggestion<'a> {
    rank: usize,
    surface: &'a str,
    stem: &'a str,
}

fn json_error(status: StatusCode, msg: &str) -> Response {
    (status, Json(json!({ "error": msg }))).into_response()
}

async fn next(State(state): State<AppState>, Query(params): Query<NextParams>) -> Response {
    if params.user.trim().is_empty() {
        return json_error(StatusCode::BAD_REQUEST, "missing user");
    }
    let Some(video) = state.store.next_for(&params.user) else {
        return Json(json!({ "done": true })).into_response();
    };
    let suggestions: Vec<WireSuggestion> = video
        .suggestions
        .iter()
        .map(|s| WireSuggestion { rank: s.rank, surface: &s.surface, stem: &s.stem })
        .collect();
    Json(json!({
        "done": false,
        "video_id": video.video_id,
        "media_url": video.media_url,
        "suggestions": suggestions,
    }))
    .into_response()
}

async fn mark(State(state): State<AppState>, body: axum::body::Bytes) -> Response {
    let mark: RelevanceMark = match serde_json::from_slice(&body) {
        Ok(m) => m,
        Err(e) => {
            let body = json!({ "status": "rejected", "reason": format!("malformed mark: {e}") });
            return (StatusCode::BAD_REQUEST, Json(body)).into_response();
        }
    };
    let store = state.store.clone();
    // the append syncs to disk, so keep it off the async workers
    let outcome = tokio::task::spawn_blocking(move || store.post_mark(mark)).await;
    match outcome {
        Ok(Ok(MarkOutcome::Accepted)) => Json(json!({ "status": "accepted" })).into_response(),
        Ok(Ok(MarkOutcome::Rejected(reason))) => {
            let status = if reason == "already marked" { StatusCode::CONFLICT } else { StatusCode::UNPROCESSABLE_ENTITY };
            (status, Json(json!({ "status": "rejected", "reason": reason }))).into_response()
        }
        Ok(Err(e)) => json_error(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
        Err(e) => json_error(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}

async fn report(State(state): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], state.store.report().to_json()).into_response()
}

/// API routes plus `/` serving the annotator bundle from `ui_dir`, or a
/// short placeholder page when none is given.
pub fn router(store: Arc<SurveyStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/next", get(next))
        .route("/api/mark", post(mark))
        .route("/api/report", get(report))
        .with_state(AppState { store });
    match ui_dir {
        Some(dir) => {
            let index = ServeFile::new(dir.join("index.html"));
            api.fallback_service(ServeDir::new(dir).fallback(index))
        }
        None => api.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    }
}

pub async fn serve(store: Arc<SurveyStore>, ui_dir: Option<PathBuf>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store, ui_dir)).await
}
