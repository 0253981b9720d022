//! HTTP routes over [`SessionService`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{ActionRequest, CreateRequest, ServiceError, SessionService};
use crate::events::SCHEMA_VERSION;

pub fn router(service: Arc<SessionService>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/actions", post(submit))
        .route("/sessions/{id}/summary", get(summary))
        .route("/export", get(export))
        .with_state(service)
}

fn error(status: StatusCode, code: &str, message: String, retry: bool) -> Response {
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "code": code, "message": message, "retry": retry },
    });
    (status, Json(body)).into_response()
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let msg = self.to_string();
        match self {
            ServiceError::NotFound(_) => error(StatusCode::NOT_FOUND, "not_found", msg, false),
            ServiceError::Illegal(_) => error(StatusCode::UNPROCESSABLE_ENTITY, "illegal_action", msg, false),
            ServiceError::NotActive { .. } => error(StatusCode::CONFLICT, "not_active", msg, false),
            ServiceError::BadKey | ServiceError::BadLatency => error(StatusCode::BAD_REQUEST, "bad_request", msg, false),
            ServiceError::Storage(_) => error(StatusCode::SERVICE_UNAVAILABLE, "storage", msg, true),
            ServiceError::Recovery { .. } | ServiceError::Engine(_) => {
                error(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg, false)
            }
        }
    }
}

fn bad_body(e: JsonRejection) -> Response {
    error(StatusCode::BAD_REQUEST, "bad_request", e.body_text(), false)
}

async fn create(State(svc): State<Arc<SessionService>>, body: Option<Json<CreateRequest>>) -> Response {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    match svc.create(req).await {
        Ok(s) => (StatusCode::CREATED, Json(s)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn state(State(svc): State<Arc<SessionService>>, Path(id): Path<String>) -> Response {
    match svc.state(&id).await {
        Ok(s) => Json(s).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn submit(
    State(svc): State<Arc<SessionService>>,
    Path(id): Path<String>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> Response {
    let req = match body {
        Ok(Json(r)) => r,
        Err(e) => return bad_body(e),
    };
    match svc.submit(&id, req).await {
        Ok(s) => Json(s).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn summary(State(svc): State<Arc<SessionService>>, Path(id): Path<String>) -> Response {
    match svc.summary(&id).await {
        Ok(s) => Json(s).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct ExportQuery {
    since: Option<u64>,
}

async fn export(State(svc): State<Arc<SessionService>>, Query(q): Query<ExportQuery>) -> Response {
    match svc.export(q.since).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response(),
        Err(e) => e.into_response(),
    }
}
