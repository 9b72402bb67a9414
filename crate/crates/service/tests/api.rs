mod common;

use std::fs;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use tagforge_core::{aggregate_relevance, evalstats::read_marks};
use tagforge_service::{router, SurveyStore};

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_json(uri: &str, body: &Value) -> Request<Body> {
    Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn app(dir: &std::path::Path) -> Router {
    router(Arc::new(SurveyStore::open(dir, &dir.join("marks.jsonl")).unwrap()), None)
}

#[tokio::test]
async fn survey_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path());
    let app = app(dir.path());

    let sizes = [7usize, 7, 1, 2];
    let mut served = Vec::new();
    loop {
        let (status, body) = call(&app, get("/api/next?user=ann")).await;
        assert_eq!(status, StatusCode::OK);
        let next = json(&body);
        if next["done"] == Value::Bool(true) {
            break;
        }
        assert_eq!(next["done"], Value::Bool(false));
        let sugg = next["suggestions"].as_array().unwrap();
        assert_eq!(sugg.len(), 15);
        assert_eq!(sugg[0]["rank"], 1);
        assert!(next["media_url"].as_str().unwrap().ends_with(".mp4"));
        let id = next["video_id"].as_str().unwrap().to_string();
        let shown: Vec<Value> = sugg.iter().map(|s| s["stem"].clone()).collect();
        // selection size keyed by video so the report matches the fixture
        let n = sizes[["a1", "a2", "b1", "b2"].iter().position(|v| *v == id).unwrap()];
        let mark = serde_json::json!({ "video_id": id, "user_id": "ann", "shown": shown, "selected": shown[..n] });
        let (status, body) = call(&app, post_json("/api/mark", &mark)).await;
        assert_eq!((status, json(&body)), (StatusCode::OK, serde_json::json!({ "status": "accepted" })));

        let (status, body) = call(&app, post_json("/api/mark", &mark)).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(json(&body), serde_json::json!({ "status": "rejected", "reason": "already marked" }));
        served.push(id);
    }
    assert_eq!(served.len(), 4);

    let (status, wire) = call(&app, get("/api/report")).await;
    assert_eq!(status, StatusCode::OK);
    let report = json(&wire);
    assert_eq!(report["overall_avg"], 4.25);
    assert_eq!(report["classes"][0]["avg_relevant"], 7.0);
    assert_eq!(report["classes"][1]["avg_relevant"], 1.5);

    // the wire report is exactly what direct aggregation of the log gives
    let path = dir.path().join("marks.jsonl");
    let marks = read_marks(fs::File::open(&path).unwrap(), &path).unwrap();
    let store = SurveyStore::open(dir.path(), &path).unwrap();
    let direct = aggregate_relevance(&marks, &store.labels(), 15).unwrap().to_json();
    assert_eq!(wire, direct.into_bytes());
}

#[tokio::test]
async fn bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let videos = common::write_fixture(dir.path());
    let app = app(dir.path());

    assert_eq!(call(&app, get("/api/next")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, get("/api/next?user=")).await.0, StatusCode::BAD_REQUEST);

    let mut mark = serde_json::to_value(common::mark_for(&videos[0], "u", 0)).unwrap();
    mark["selected"] = serde_json::json!(["ghost"]);
    let (status, body) = call(&app, post_json("/api/mark", &mark)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json(&body)["reason"], "unknown selection");

    let (status, body) = call(&app, post_json("/api/mark", &serde_json::json!({ "video_id": 3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["status"], "rejected");

    let empty = serde_json::to_value(common::mark_for(&videos[0], "u", 0)).unwrap();
    assert_eq!(call(&app, post_json("/api/mark", &empty)).await.0, StatusCode::OK);
}

#[tokio::test]
async fn empty_report_and_root_page() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path());
    let app = app(dir.path());
    let (_, body) = call(&app, get("/api/report")).await;
    let report = json(&body);
    assert_eq!(report["total_marks"], 0);
    assert_eq!(report["reference_tags_per_video"], 4.79);

    let (status, body) = call(&app, get("/")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("<html>"));
}

#[tokio::test]
async fn serves_ui_bundle_when_given() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path());
    let ui = tempfile::tempdir().unwrap();
    fs::write(ui.path().join("index.html"), "<p>bundle</p>").unwrap();
    fs::write(ui.path().join("app.js"), "console.log(1)").unwrap();
    let store = Arc::new(SurveyStore::open(dir.path(), &dir.path().join("marks.jsonl")).unwrap());
    let app = router(store, Some(ui.path().to_path_buf()));
    assert_eq!(call(&app, get("/")).await.1, b"<p>bundle</p>");
    assert_eq!(call(&app, get("/app.js")).await.1, b"console.log(1)");
    assert_eq!(call(&app, get("/api/next?user=x")).await.0, StatusCode::OK);
}
