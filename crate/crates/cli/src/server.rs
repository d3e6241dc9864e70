//! HTTP face of the annotation queue. Every JSON body carries the schema
//! version shared with the task and record files.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;
use tvpolar::annotation::{AnnotationRecord, AnnotationTask, LabelStatus, TaskQueue, SCHEMA_VERSION};
use tvpolar::Error;

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

#[derive(Serialize)]
struct NextTask {
    schema_version: u32,
    task: Option<AnnotationTask>,
}

#[derive(Serialize)]
struct Submitted {
    schema_version: u32,
    task_id: String,
    status: LabelStatus,
}

fn failure(code: StatusCode, msg: impl Into<String>) -> Response {
    (code, Json(json!({ "schema_version": SCHEMA_VERSION, "error": msg.into() }))).into_response()
}

pub fn router(queue: Arc<TaskQueue>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/tasks/next", get(next_task))
        .route("/records", post(submit))
        .route("/progress", get(progress))
        .with_state(queue);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn next_task(State(q): State<Arc<TaskQueue>>, Query(p): Query<NextQuery>) -> Response {
    let Some(annotator) = p.annotator.filter(|a| !a.trim().is_empty()) else {
        return failure(StatusCode::BAD_REQUEST, "query parameter `annotator` is required");
    };
    Json(NextTask {
        schema_version: SCHEMA_VERSION,
        task: q.next_task(&annotator),
    })
    .into_response()
}

async fn submit(State(q): State<Arc<TaskQueue>>, body: Bytes) -> Response {
    let record: AnnotationRecord = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return failure(StatusCode::BAD_REQUEST, format!("malformed record: {e}")),
    };
    let task_id = record.task_id.clone();
    // the queue lock and the log write block, keep them off the reactor
    let result = tokio::task::spawn_blocking(move || q.submit(record)).await;
    match result {
        Ok(Ok(status)) => Json(Submitted {
            schema_version: SCHEMA_VERSION,
            task_id,
            status,
        })
        .into_response(),
        Ok(Err(e)) => {
            let code = match e {
                Error::UnknownTask(_) => StatusCode::NOT_FOUND,
                Error::Conflict(_) => StatusCode::CONFLICT,
                Error::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            failure(code, e.to_string())
        }
        Err(e) => failure(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn progress(State(q): State<Arc<TaskQueue>>) -> Response {
    Json(q.progress()).into_response()
}
