use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use shadowkit::server::{router, AppState};
use shadowkit::synth::{demo_tuples, write_fixture};
use shadowkit::{load_manifest, Config};
use shadowkit_core::io::encode_rgb_png;
use shadowkit_core::{AnnotationRecord, LightEstimate};
use tempfile::TempDir;
use tower::ServiceExt;

struct Harness {
    dir: TempDir,
    app: Router,
}

fn harness() -> Harness {
    let dir = TempDir::new().unwrap();
    let cfg = Config::default();
    write_fixture(dir.path(), 128, &demo_tuples(LightEstimate::default()), &cfg).unwrap();
    // Start scene_free unannotated.
    std::fs::remove_file(dir.path().join("annotations/scene_free.json")).unwrap();
    let path = dir.path().join("manifest.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["annotations"].as_object_mut().unwrap().remove("scene_free");
    std::fs::write(&path, v.to_string()).unwrap();
    let m = load_manifest(&path).unwrap();
    Harness {
        app: router(AppState::new(m, cfg)),
        dir,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

const CLICKS: [(f64, f64); 9] = [
    (128.0, 40.0),
    (110.0, 80.0),
    (146.0, 80.0),
    (100.0, 110.0),
    (156.0, 110.0),
    (120.0, 160.0),
    (136.0, 160.0),
    (120.0, 220.0),
    (136.0, 220.0),
];

#[tokio::test]
async fn lists_images() {
    let h = harness();
    let (s, v) = call_json(&h.app, "GET", "/api/images", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        v,
        json!([
            {"image_id": "scene_bos", "width": 128, "height": 128, "annotated": true},
            {"image_id": "scene_free", "width": 128, "height": 128, "annotated": false},
        ])
    );
    let (s, png) = call(&h.app, "GET", "/api/image/scene_bos", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(&png[1..4], b"PNG");
    let (s, v) = call_json(&h.app, "GET", "/api/image/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "NotFound");
}

#[tokio::test]
async fn point_then_get_session_shows_head() {
    let h = harness();
    let (s, v) = call_json(&h.app, "POST", "/api/session/scene_free/point", Some(json!({"x": 10.0, "y": 20.0}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["next_keypoint"], "ElbowL");
    let (_, v) = call_json(&h.app, "GET", "/api/session/scene_free", None).await;
    assert_eq!(v["points"], json!([{"name": "Head", "x": 10.0, "y": 20.0}]));
    assert_eq!(v["committed"], false);
    let (_, v) = call_json(&h.app, "POST", "/api/session/scene_free/undo", None).await;
    assert_eq!(v["points"], json!([]));
    let (s, v) = call_json(&h.app, "POST", "/api/session/scene_free/undo", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("EmptySession")));
}

#[tokio::test]
async fn rejects_bad_points() {
    let h = harness();
    let (s, v) = call_json(&h.app, "POST", "/api/session/scene_free/point", Some(json!({"x": 999.0, "y": 1.0}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("OutOfBounds")));
    let (s, v) = call_json(&h.app, "POST", "/api/session/scene_free/point", Some(json!({"x": "a"}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("BadRequest")));
    assert!(v["message"].is_string());
}

#[tokio::test]
async fn commit_flow() {
    let h = harness();
    for &(x, y) in &CLICKS[..8] {
        let (s, _) = call(&h.app, "POST", "/api/session/scene_free/point", Some(json!({"x": x, "y": y}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, v) = call_json(&h.app, "POST", "/api/session/scene_free/commit", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("BelowMinimum")));
    let (s, _) = call_json(&h.app, "GET", "/api/annotation/scene_free", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (x, y) = CLICKS[8];
    call(&h.app, "POST", "/api/session/scene_free/point", Some(json!({"x": x, "y": y}))).await;
    let (s, v) = call_json(&h.app, "POST", "/api/session/scene_free/point", Some(json!({"x": 1.0, "y": 1.0}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("SetFull")));
    let (s, body) = call(&h.app, "POST", "/api/session/scene_free/commit", None).await;
    assert_eq!(s, StatusCode::OK);
    let rec = AnnotationRecord::from_json(std::str::from_utf8(&body).unwrap()).unwrap();
    assert!(rec.is_complete());
    assert_eq!((rec.original_width, rec.original_height), (128, 128));
    assert!(rec.torso_block.is_some());

    let persisted = std::fs::read_to_string(h.dir.path().join("annotations/scene_free.json")).unwrap();
    assert_eq!(persisted.as_bytes(), &body[..]);
    let (_, served) = call(&h.app, "GET", "/api/annotation/scene_free", None).await;
    assert_eq!(served, body);
    let (_, v) = call_json(&h.app, "GET", "/api/images", None).await;
    assert_eq!(v[1]["annotated"], true);
    let (s, v) = call_json(&h.app, "POST", "/api/session/scene_free/undo", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("SessionClosed")));
    let (_, v) = call_json(&h.app, "POST", "/api/session/scene_free/reset", None).await;
    assert_eq!(v["points"], json!([]));
}

#[tokio::test]
async fn preview_renders_png() {
    let h = harness();
    let m = load_manifest(&h.dir.path().join("manifest.json")).unwrap();
    let source = m.tuple("scene_bos").unwrap().read_composite().unwrap();
    let req = |alpha: f64| json!({"image_id": "scene_bos", "theta": 0.8, "azimuth": [1.0, 0.0], "alpha": alpha, "sigma": 1.0});

    let (s, png) = call(&h.app, "POST", "/api/preview/shadow", Some(req(0.0))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(png, encode_rgb_png(&source).unwrap());

    let (s, shaded) = call(&h.app, "POST", "/api/preview/shadow", Some(req(0.6))).await;
    assert_eq!(s, StatusCode::OK);
    assert_ne!(shaded, png);

    let (s, v) = call_json(&h.app, "POST", "/api/preview/shadow", Some(json!({"image_id": "scene_free", "theta": 0.8, "azimuth": [1.0, 0.0], "alpha": 0.5, "sigma": 1.0}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("NotAnnotated")));
    let mut bad = req(0.5);
    bad["theta"] = json!(2.0);
    let (s, v) = call_json(&h.app, "POST", "/api/preview/shadow", Some(bad)).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("InvalidParameters")));
}

#[tokio::test]
async fn concurrent_points_are_serialized() {
    let h = harness();
    let app = Arc::new(h.app.clone());
    let tasks: Vec<_> = (0..9)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                call(&app, "POST", "/api/session/scene_free/point", Some(json!({"x": 10.0 + i as f64, "y": 10.0}))).await.0
            })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let (_, v) = call_json(&h.app, "GET", "/api/session/scene_free", None).await;
    assert_eq!(v["points"].as_array().unwrap().len(), 9);
    assert!(v["next_keypoint"].is_null());
}
