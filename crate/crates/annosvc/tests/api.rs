use std::path::Path;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;
use weftcodec::io::{self, Annotation};
use weftcodec::midrep::build_box;
use weftcodec::weavesim::{random_pattern, render, GroundTruth, RenderParams};
use weftcodec::{CrossPoint, GrayImage, Raster};
use weftcodec_annosvc::{router, ServiceConfig, SessionStore};

struct Fixture {
    dir: tempfile::TempDir,
    app: Router,
    truth: GroundTruth,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    std::fs::create_dir(&images).unwrap();
    let pattern = random_pattern(16, 25, 0.5, 4).unwrap();
    let (img, truth) = render::<f64>(&pattern, &RenderParams::default()).unwrap();
    io::save_gray_png(&img, &images.join("fabric.png")).unwrap();
    io::save_gray_png(&Raster::filled(64, 48, 0.5f64).unwrap(), &images.join("flat.png")).unwrap();
    std::fs::write(images.join("notes.txt"), "not an image").unwrap();
    let store = SessionStore::new(ServiceConfig::new(&images, dir.path().join("state"))).unwrap();
    Fixture {
        app: router(Arc::new(store)),
        truth,
        dir,
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    (status, to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn open(app: &Router, image: &str) -> (String, Value) {
    let (status, body) = call_json(app, Method::POST, "/api/session", Some(json!({ "image_id": image }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    (body["session"].as_str().unwrap().to_string(), body["state"].clone())
}

async fn edit(app: &Router, id: &str, edit: Value, base: u64) -> (StatusCode, Value) {
    call_json(app, Method::POST, &format!("/api/session/{id}/edit"), Some(json!({ "edit": edit, "base_revision": base }))).await
}

fn crossings(state: &Value) -> Vec<CrossPoint> {
    serde_json::from_value(state["crossings"].clone()).unwrap()
}

#[tokio::test]
async fn lists_and_serves_images() {
    let f = fixture();
    let (status, list) = call_json(&f.app, Method::GET, "/api/images", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list, json!(["fabric.png", "flat.png"]));

    let (status, bytes) = call(&f.app, Method::GET, "/api/image/fabric.png", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&bytes[1..4], b"PNG");
    for bad in ["/api/image/notes.txt", "/api/image/..%2Fstate", "/api/image/missing.png"] {
        assert_eq!(call(&f.app, Method::GET, bad, None).await.0, StatusCode::NOT_FOUND, "{bad}");
    }
}

#[tokio::test]
async fn clean_render_opens_with_ground_truth_crossings() {
    let f = fixture();
    let (_, state) = open(&f.app, "fabric.png").await;
    assert_eq!(state["revision"], 0);
    assert!(state.get("warning").is_none());
    let found = crossings(&state);
    assert_eq!(found.len(), f.truth.crossings.len());
    for (a, b) in found.iter().zip(&f.truth.crossings) {
        assert_eq!(a.v, b.v);
        assert!(a.distance(b.x, b.y) <= 1.0, "{a:?} vs {b:?}");
    }
}

#[tokio::test]
async fn flat_image_opens_with_warning_and_empty_grid() {
    let f = fixture();
    let (_, state) = open(&f.app, "flat.png").await;
    assert!(state["warning"].is_string());
    assert_eq!(state["grid"], json!({ "warp_x": [], "weft_y": [] }));
    assert_eq!(state["crossings"], json!([]));
}

#[tokio::test]
async fn flip_is_persisted_and_sessions_are_isolated() {
    let f = fixture();
    let (a, state) = open(&f.app, "fabric.png").await;
    let (b, _) = open(&f.app, "fabric.png").await;
    assert_ne!(a, b);
    let target = crossings(&state)[30];

    let (status, next) = edit(&f.app, &a, json!({ "kind": "flip_nearest", "x": target.x + 1.0, "y": target.y }), 0).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(next["revision"], 1);

    let (_, fetched) = call_json(&f.app, Method::GET, &format!("/api/session/{a}"), None).await;
    assert_eq!(crossings(&fetched)[30].v, 1 - target.v);
    let (_, other) = call_json(&f.app, Method::GET, &format!("/api/session/{b}"), None).await;
    assert_eq!(crossings(&other)[30].v, target.v);
    assert_eq!(other["revision"], 0);

    let journal: Value = serde_json::from_slice(&std::fs::read(f.dir.path().join(format!("state/{a}.json"))).unwrap()).unwrap();
    assert_eq!(journal, fetched);
}

#[tokio::test]
async fn stale_and_invalid_edits_leave_state_unchanged() {
    let f = fixture();
    let (id, _) = open(&f.app, "fabric.png").await;
    let (status, _) = edit(&f.app, &id, json!({ "kind": "add_warp", "x": 5.0 }), 0).await;
    assert_eq!(status, StatusCode::OK);

    let (status, body) = edit(&f.app, &id, json!({ "kind": "delete_warp", "index": 0 }), 0).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["current_revision"], 1);

    let (status, _) = edit(&f.app, &id, json!({ "kind": "delete_warp", "index": 999 }), 1).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, state) = call_json(&f.app, Method::GET, &format!("/api/session/{id}"), None).await;
    assert_eq!(state["revision"], 1);
    assert_eq!(state["grid"]["warp_x"].as_array().unwrap().len(), 26);

    let (status, _) = call_json(&f.app, Method::GET, "/api/session/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn recompute_covers_the_grid() {
    let f = fixture();
    let (id, _) = open(&f.app, "fabric.png").await;
    edit(&f.app, &id, json!({ "kind": "move_warp", "index": 3, "x": 75.0 }), 0).await;
    edit(&f.app, &id, json!({ "kind": "delete_weft", "index": 0 }), 1).await;
    let (status, state) = edit(&f.app, &id, json!({ "kind": "recompute_crossings" }), 2).await;
    assert_eq!(status, StatusCode::OK);
    let warps = state["grid"]["warp_x"].as_array().unwrap().len();
    let wefts = state["grid"]["weft_y"].as_array().unwrap().len();
    assert_eq!((warps, wefts), (25, 15));
    assert_eq!(crossings(&state).len(), warps * wefts);
}

fn load_png(path: &Path) -> GrayImage {
    io::load_gray_png_strict(path).unwrap()
}

#[tokio::test]
async fn export_writes_labels_annotation_and_pattern() {
    let f = fixture();
    let (id, state) = open(&f.app, "fabric.png").await;
    let points = crossings(&state);

    let (status, files) = call_json(&f.app, Method::POST, &format!("/api/session/{id}/export"), Some(json!({ "kind": { "kind": "box", "window": 9 } }))).await;
    assert_eq!(status, StatusCode::OK, "{files}");
    let labels = Path::new(files["labels"].as_str().unwrap());
    let expected = build_box(&points, 512, 320, 9).unwrap().to_gray::<f64>();
    assert_eq!(std::fs::read(labels).unwrap(), io::gray_png_bytes(&expected).unwrap());
    let pattern = io::load_pattern(Path::new(files["pattern"].as_str().unwrap())).unwrap();
    assert_eq!(pattern, f.truth.pattern);
    let annotation = Annotation::load(Path::new(files["annotation"].as_str().unwrap())).unwrap();
    assert_eq!(annotation.crossings, points);

    let (_, files) = call_json(&f.app, Method::POST, &format!("/api/session/{id}/export"), Some(json!({ "kind": { "kind": "impulse" } }))).await;
    let impulse = load_png(Path::new(files["labels"].as_str().unwrap()));
    let marked = impulse.data().iter().filter(|&&v| io::to_byte(v) != 128).count();
    assert_eq!(marked, points.len());

    let (status, _) = call_json(&f.app, Method::POST, &format!("/api/session/{id}/export"), Some(json!({ "kind": { "kind": "box", "window": 4 } }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn exports_depend_only_on_state() {
    let f = fixture();
    let (a, _) = open(&f.app, "fabric.png").await;
    let (b, _) = open(&f.app, "fabric.png").await;
    let kind = json!({ "kind": { "kind": "gaussian", "sigma": 3.0 } });
    let (_, fa) = call_json(&f.app, Method::POST, &format!("/api/session/{a}/export"), Some(kind.clone())).await;
    let (_, fb) = call_json(&f.app, Method::POST, &format!("/api/session/{b}/export"), Some(kind)).await;
    for key in ["labels", "pattern"] {
        let read = |v: &Value| std::fs::read(v[key].as_str().unwrap()).unwrap();
        assert_eq!(read(&fa), read(&fb), "{key}");
    }
}

#[tokio::test]
async fn empty_session_cannot_export() {
    let f = fixture();
    let (id, _) = open(&f.app, "flat.png").await;
    let (status, body) = call_json(&f.app, Method::POST, &format!("/api/session/{id}/export"), Some(json!({ "kind": { "kind": "impulse" } }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("invalid state"));
}
