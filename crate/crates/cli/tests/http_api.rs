use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use decor_cli::{router, AppState};
use decor_core::llm::RuleBasedStub;
use decor_core::pipeline::{Engine, JobStore};
use decor_core::DecorScene;

fn app(dir: &std::path::Path) -> Router {
    let store = JobStore::open(dir).unwrap();
    router(AppState::new(Engine::new(Arc::new(RuleBasedStub)), store))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, ctype, bytes)
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn finished_job(app: &Router, n: usize) -> String {
    let body = json!({ "mesh": "fixture:desk_with_shelf", "prompt": "study corner", "n_assets": n, "seed": 1 });
    let (status, _, bytes) = call(app, "POST", "/jobs?wait=true", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED);
    let v = json_of(&bytes);
    assert_eq!(v["status"]["state"], "done", "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test(flavor = "multi_thread")]
async fn job_lifecycle_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = finished_job(&app, 6).await;

    let (status, _, bytes) = call(&app, "GET", &format!("/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&bytes);
    let scene: DecorScene = serde_json::from_value(v["scene"].clone()).unwrap();
    assert_eq!(scene.layout.len(), 6);
    assert_eq!(scene.revision, 0);

    let (status, ctype, bytes) = call(&app, "GET", &format!("/scenes/{id}/svg?surface=1"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype, "image/svg+xml");
    assert!(String::from_utf8(bytes).unwrap().starts_with("<svg"));

    let (status, _, bytes) = call(&app, "GET", &format!("/scenes/{id}/metrics"), None).await;
    assert_eq!(status, StatusCode::OK);
    let m = json_of(&bytes);
    assert_eq!(m["oob_rate"], 0.0);
    assert_eq!(m["bbl_m3"], 0.0);
}

#[tokio::test(flavor = "multi_thread")]
async fn edits_bump_the_revision() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = finished_job(&app, 5).await;
    let (_, _, bytes) = call(&app, "GET", &format!("/jobs/{id}"), None).await;
    let scene: DecorScene = serde_json::from_value(json_of(&bytes)["scene"].clone()).unwrap();
    let target = scene.assets[0].id.clone();

    let ops = json!({ "ops": [{ "kind": "remove", "target": target }] });
    let (status, _, bytes) = call(&app, "POST", &format!("/scenes/{id}/edits"), Some(ops)).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    let next: DecorScene = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(next.revision, 1);
    assert!(next.asset(&target).is_none());

    let (_, _, bytes) = call(&app, "GET", &format!("/jobs/{id}"), None).await;
    let v = json_of(&bytes);
    assert_eq!(v["status"]["revision"], 1);
    assert_eq!(v["scene"]["revision"], 1);
    assert!(dir.path().join(&id).join("revisions/rev-0001.json").is_file());
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_map_to_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let bad = json!({ "mesh": "fixture:flat_desk", "prompt": "", "n_assets": 3 });
    let (status, _, bytes) = call(&app, "POST", "/jobs", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = json_of(&bytes);
    assert_eq!(v["class"], "validation");
    assert_eq!(v["exit_code"], 2);

    let (status, _, _) = call(&app, "GET", "/jobs/job-999999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&app, "GET", "/jobs/..%2Fetc", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = finished_job(&app, 4).await;
    let (status, _, _) = call(&app, "GET", &format!("/scenes/{id}/svg?surface=7"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let unknown = json!({ "ops": [{ "kind": "remove", "target": "piano-1" }] });
    let (status, _, _) = call(&app, "POST", &format!("/scenes/{id}/edits"), Some(unknown)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, _, bytes) = call(&app, "GET", &format!("/jobs/{id}"), None).await;
    let before = json_of(&bytes)["scene"].clone();
    let target = before["assets"][0]["id"].as_str().unwrap().to_string();
    let huge = json!({ "ops": [{ "kind": "resize", "target": target, "width_cm": 500.0, "depth_cm": 500.0, "height_cm": 5.0 }] });
    let (status, _, bytes) = call(&app, "POST", &format!("/scenes/{id}/edits"), Some(huge)).await;
    assert!(status == StatusCode::CONFLICT || status == StatusCode::UNPROCESSABLE_ENTITY, "{status}");
    assert!(json_of(&bytes)["exit_code"].as_i64().unwrap() >= 2);
    let (_, _, bytes) = call(&app, "GET", &format!("/jobs/{id}"), None).await;
    assert_eq!(json_of(&bytes)["scene"], before);
}

#[tokio::test(flavor = "multi_thread")]
async fn async_job_eventually_finishes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let body = json!({ "mesh": "fixture:nightstand", "prompt": "bedside", "n_assets": 2 });
    let (status, _, bytes) = call(&app, "POST", "/jobs", Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = json_of(&bytes)["id"].as_str().unwrap().to_string();
    for _ in 0..200 {
        let (_, _, bytes) = call(&app, "GET", &format!("/jobs/{id}"), None).await;
        let v = json_of(&bytes);
        if v["status"]["state"] == "done" {
            assert_eq!(v["scene"]["assets"].as_array().unwrap().len(), 2);
            return;
        }
        assert_ne!(v["status"]["state"], "failed", "{v}");
        std::thread::sleep(std::time::Duration::from_millis(25));
    }
    panic!("job did not finish");
}
