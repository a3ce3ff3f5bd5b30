use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use super::session::Choice;
use super::store::SessionStore;
use super::AnnotationError;

pub type Sessions = Arc<HashMap<String, Arc<SessionStore>>>;

impl IntoResponse for AnnotationError {
    fn into_response(self) -> Response {
        let status = match &self {
            AnnotationError::UnknownSession(_) | AnnotationError::UnknownTask(_) => StatusCode::NOT_FOUND,
            AnnotationError::UnknownAnnotator(_) => StatusCode::FORBIDDEN,
            AnnotationError::AlreadyJudged(_) => StatusCode::CONFLICT,
            AnnotationError::MissingReview { .. } | AnnotationError::InvalidSession(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string(), "kind": self.kind() }))).into_response()
    }
}

fn store(sessions: &Sessions, id: &str) -> Result<Arc<SessionStore>, AnnotationError> {
    sessions.get(id).cloned().ok_or_else(|| AnnotationError::UnknownSession(id.into()))
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: String,
}

#[derive(Deserialize)]
struct Submission {
    annotator: String,
    task_id: String,
    choice: Choice,
}

async fn next(State(s): State<Sessions>, Path(id): Path<String>, Query(q): Query<AnnotatorQuery>) -> Result<impl IntoResponse, AnnotationError> {
    Ok(Json(store(&s, &id)?.next_task(&q.annotator)?))
}

async fn judgments(State(s): State<Sessions>, Path(id): Path<String>, Json(sub): Json<Submission>) -> Result<impl IntoResponse, AnnotationError> {
    let st = store(&s, &id)?;
    let judgment = tokio::task::spawn_blocking(move || st.submit(&sub.annotator, &sub.task_id, sub.choice))
        .await
        .map_err(|e| AnnotationError::InvalidSession(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(judgment)))
}

async fn export(State(s): State<Sessions>, Path(id): Path<String>) -> Result<impl IntoResponse, AnnotationError> {
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], store(&s, &id)?.export()))
}

async fn progress(State(s): State<Sessions>, Path(id): Path<String>) -> Result<impl IntoResponse, AnnotationError> {
    Ok(Json(store(&s, &id)?.progress()))
}

/// The JSON API, plus static files from `static_dir` for everything else.
pub fn router(sessions: Sessions, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/session/{id}/next", get(next))
        .route("/session/{id}/judgments", post(judgments))
        .route("/session/{id}/export", get(export))
        .route("/session/{id}/progress", get(progress))
        .with_state(sessions);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
