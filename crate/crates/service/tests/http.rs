use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use rsl_service::server::{router, AppState, ServerConfig};

fn config(dir: &std::path::Path, delay: Option<(u64, u64)>) -> ServerConfig {
    ServerConfig {
        delay_ms: delay,
        ..ServerConfig::new(dir)
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn create(app: &Router, participant: &str) -> String {
    let (status, body) = call(app, "POST", "/v1/sessions", Some(json!({"v": 1, "participant_id": participant, "master_seed": 42}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["v"], 1);
    body["session_id"].as_str().unwrap().to_string()
}

/// A move appropriate to whichever task the next evaluation goes to.
fn next_move(view: &Value, x: usize) -> Value {
    if view["next_phase"] == "team" {
        json!({"v": 1, "x": x})
    } else {
        json!({"v": 1, "x": x, "y": (x * 7) % 24})
    }
}

#[tokio::test]
async fn full_session_over_the_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::recover(config(dir.path(), None)).unwrap());
    let (status, health) = call(&app, "GET", "/healthz", None).await;
    assert_eq!((status, health["status"].as_str()), (StatusCode::OK, Some("ok")));

    let id = create(&app, "alice").await;
    let base = format!("/v1/sessions/{id}");
    let (status, _) = call(&app, "GET", &format!("{base}/bonus"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, err) = call(&app, "POST", &format!("{base}/finalize"), None).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("nothing_evaluated")));

    for task in 0..4 {
        let (_, mut view) = call(&app, "GET", &base, None).await;
        for k in 0..3 {
            let (status, res) = call(&app, "POST", &format!("{base}/evaluate"), Some(next_move(&view, task * 5 + k))).await;
            assert_eq!(status, StatusCode::OK, "{res}");
            assert_eq!(res["task_index"], task);
            assert_eq!(res["feedback"]["sequence"], k + 1);
            view = res["session"].clone();
        }
        let (status, res) = call(&app, "POST", &format!("{base}/finalize"), None).await;
        assert_eq!(status, StatusCode::OK, "{res}");
        assert_eq!(res["task_index"], task);
        let (status, layers) = call(&app, "GET", &format!("{base}/tasks/{task}/layers"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(layers["grid"]["shape"], json!([4, 24, 24]));
    }
    let (status, bonus) = call(&app, "GET", &format!("{base}/bonus"), None).await;
    assert_eq!(status, StatusCode::OK);
    let b = bonus["bonus"].as_f64().unwrap();
    assert!((0.0..=2.0).contains(&b));
    let (status, err) = call(&app, "POST", &format!("{base}/evaluate"), Some(json!({"x": 1, "y": 1}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("session_not_active")));
}

#[tokio::test]
async fn errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::recover(config(dir.path(), None)).unwrap());
    let (status, err) = call(&app, "GET", "/v1/sessions/nope", None).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));
    let id = create(&app, "bob").await;
    let (status, _) = call(&app, "POST", "/v1/sessions", Some(json!({"participant_id": "bob", "master_seed": 42}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let base = format!("/v1/sessions/{id}");
    let (status, err) = call(&app, "POST", &format!("{base}/evaluate"), Some(json!({"x": 3}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::BAD_REQUEST, Some("task_is_solo")));
    let (status, err) = call(&app, "POST", &format!("{base}/evaluate"), Some(json!({"x": 30, "y": 1}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::BAD_REQUEST, Some("out_of_bounds")));
    let (status, err) = call(&app, "POST", &format!("{base}/evaluate"), Some(json!({"v": 9, "x": 1, "y": 1}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::BAD_REQUEST, Some("unsupported_version")));
    let (status, err) = call(&app, "POST", &format!("{base}/evaluate"), Some(json!({"y": 1}))).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
    let (status, err) = call(&app, "GET", &format!("{base}/tasks/0/layers"), None).await;
    assert_eq!((status, err["error"].as_str()), (StatusCode::CONFLICT, Some("task_not_finalized")));
    let (_, view) = call(&app, "GET", &base, None).await;
    assert!(view["task"]["history"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn restart_resumes_the_identical_session() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::recover(config(dir.path(), None)).unwrap();
    let app = router(state.clone());
    let id = create(&app, "carol").await;
    let base = format!("/v1/sessions/{id}");
    for round in 0..3 {
        let (_, view) = call(&app, "GET", &base, None).await;
        call(&app, "POST", &format!("{base}/evaluate"), Some(next_move(&view, round + 2))).await;
        call(&app, "POST", &format!("{base}/evaluate"), Some(next_move(&view, round + 9))).await;
        call(&app, "POST", &format!("{base}/finalize"), None).await;
    }
    let (_, view) = call(&app, "GET", &base, None).await;
    call(&app, "POST", &format!("{base}/evaluate"), Some(next_move(&view, 4))).await;

    let before = state.session(&id).await.unwrap().lock().await.clone();
    let (_, view_before) = call(&app, "GET", &base, None).await;
    drop(app);
    drop(state);

    let state = AppState::recover(config(dir.path(), None)).unwrap();
    let after = state.session(&id).await.unwrap().lock().await.clone();
    assert_eq!(after, before);
    let app = router(state);
    let (_, view_after) = call(&app, "GET", &base, None).await;
    assert_eq!(view_after, view_before);
    let (status, _) = call(&app, "POST", &format!("{base}/finalize"), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn concurrent_evaluations_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::recover(config(dir.path(), None)).unwrap();
    let app = router(state.clone());
    let id = create(&app, "dave").await;
    let uri = format!("/v1/sessions/{id}/evaluate");
    let handles: Vec<_> = (0..16)
        .map(|k| {
            let (app, uri) = (app.clone(), uri.clone());
            tokio::spawn(async move { call(&app, "POST", &uri, Some(json!({"x": k, "y": k}))).await })
        })
        .collect();
    let mut sequences = Vec::new();
    for h in handles {
        let (status, res) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        sequences.push(res["feedback"]["sequence"].as_u64().unwrap());
    }
    sequences.sort();
    assert_eq!(sequences, (1..=16).collect::<Vec<_>>());

    let session = state.session(&id).await.unwrap().lock().await.clone();
    let seqs: Vec<u64> = session.events.iter().map(|e| e.sequence).collect();
    assert_eq!(seqs, (0..session.events.len() as u64).collect::<Vec<_>>());
    assert_eq!(state.store.load(&id).unwrap(), session.events);
}

async fn team_transcript(delay: Option<(u64, u64)>) -> (Vec<Value>, std::time::Duration) {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::recover(config(dir.path(), delay)).unwrap());
    let id = create(&app, "erin").await;
    let base = format!("/v1/sessions/{id}");
    let mut out = Vec::new();
    let mut team_time = std::time::Duration::ZERO;
    for task in 0..4 {
        let (_, view) = call(&app, "GET", &base, None).await;
        for k in 0..3 {
            let started = std::time::Instant::now();
            let (_, res) = call(&app, "POST", &format!("{base}/evaluate"), Some(next_move(&view, task + k * 3))).await;
            if task >= 2 {
                team_time += started.elapsed();
            }
            out.push(res);
        }
        out.push(call(&app, "POST", &format!("{base}/finalize"), None).await.1);
    }
    out.push(call(&app, "GET", &format!("{base}/bonus"), None).await.1);
    (out, team_time)
}

#[tokio::test]
async fn helper_delay_changes_timing_only() {
    let (slow, slow_time) = team_transcript(Some((40, 60))).await;
    let (fast, _) = team_transcript(None).await;
    assert_eq!(slow, fast);
    assert!(slow_time >= std::time::Duration::from_millis(6 * 40));
}

#[test]
fn state_is_shareable() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<Arc<AppState>>();
}
