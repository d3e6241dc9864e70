use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use tvpolar::annotation::{aggregate, import_records, AnnotationTask, TaskQueue, SCHEMA_VERSION};
use tvpolar::corpus::StationId;
use tvpolar_cli::server::router;

fn task(id: &str) -> AnnotationTask {
    AnnotationTask {
        schema_version: SCHEMA_VERSION,
        task_id: id.into(),
        segment_id: format!("ep#{id}"),
        station: StationId::new_unchecked("FNC"),
        topic: "guns".into(),
        text: "some words".into(),
        candidates: vec!["guns".into(), "china".into(), "climate".into()],
    }
}

fn record(task: &str, who: &str, choice: &str) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "task_id": task,
        "annotator_id": who,
        "choice": choice,
        "timestamp": "2024-03-01T12:00:00Z",
    })
}

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: &Value) -> Request<Body> {
    Request::post("/records")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn next_submit_progress_flow() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("records.jsonl");
    let tasks = vec![task("t1"), task("t2")];
    let q = Arc::new(TaskQueue::new(tasks.clone(), 4, 7).unwrap().with_log(&log).unwrap());
    let app = router(q.clone(), None);

    let (s, body) = call(&app, get("/tasks/next?annotator=a1")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["schema_version"], SCHEMA_VERSION);
    assert_eq!(body["task"]["task_id"], "t1");
    assert_eq!(body["task"]["candidates"].as_array().unwrap().len(), 3);

    let (s, body) = call(&app, get("/tasks/next")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["schema_version"], SCHEMA_VERSION);

    // four annotators, three agree on t1; t2 gets a 2-2 split
    for (who, c1, c2) in [("a1", "guns", "none"), ("a2", "guns", "none"), ("a3", "china", "china"), ("a4", "guns", "china")] {
        let (s, body) = call(&app, post(&record("t1", who, c1))).await;
        assert_eq!(s, StatusCode::OK, "{body}");
        assert_eq!(body["schema_version"], SCHEMA_VERSION);
        let (s, _) = call(&app, post(&record("t2", who, c2))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, body) = call(&app, get("/progress")).await;
    assert_eq!(body["schema_version"], SCHEMA_VERSION);
    assert_eq!(body["tasks"], 2);
    assert_eq!(body["records"], 8);
    assert_eq!(body["resolved"], 1);
    assert_eq!(body["needs_more"], 1);
    assert_eq!(body["annotators"], 4);

    // t1 is closed; a1 has seen t2, so nothing is left for a1
    let (_, body) = call(&app, get("/tasks/next?annotator=a1")).await;
    assert!(body["task"].is_null());
    let (_, body) = call(&app, get("/tasks/next?annotator=a5")).await;
    assert_eq!(body["task"]["task_id"], "t2");

    // double submission, closed task, changed answer, unknown task, bad
    // choice, bad schema, junk
    let (s, body) = call(&app, post(&record("t2", "a4", "china"))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["schema_version"], SCHEMA_VERSION);
    let (s, _) = call(&app, post(&record("t1", "a5", "guns"))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, post(&record("t2", "a4", "guns"))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, post(&record("t9", "a5", "guns"))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, post(&record("t2", "a5", "abortion"))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let mut old = record("t2", "a5", "guns");
    old["schema_version"] = json!(SCHEMA_VERSION + 1);
    let (s, _) = call(&app, post(&old)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, body) = call(&app, post(&json!({"hello": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["schema_version"], SCHEMA_VERSION);

    // what the service aggregated equals importing its log from file
    let served = q.ground_truth().unwrap();
    let report = import_records(&log, &tasks).unwrap();
    assert!(report.rejected.is_empty());
    assert_eq!(report.records.len(), 8);
    assert_eq!(aggregate(&tasks, &report.records, 4, 7).unwrap(), served);
}

#[tokio::test]
async fn serves_static_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>labels</p>").unwrap();
    let q = Arc::new(TaskQueue::new(vec![task("t1")], 4, 7).unwrap());
    let app = router(q, Some(dir.path().to_path_buf()));
    let resp = app.clone().oneshot(get("/index.html")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<p>labels</p>");
    let (s, body) = call(&app, get("/progress")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["tasks"], 1);
}
