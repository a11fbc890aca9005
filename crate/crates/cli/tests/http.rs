use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pyrofront_cli::server::{router, AppState};
use pyrofront_core::Mode;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new(Mode::Exploratory))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, Vec<u8>) {
    let request = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let request = match body {
        Some(b) => request.body(Body::from(b.to_string())).unwrap(),
        None => request.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

async fn create(app: &Router, body: Value) -> String {
    let (status, value, _) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{value}");
    value["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn free_spread_fills_the_square() {
    let app = app();
    let id = create(&app, json!({ "name": "single", "q": 2, "h": 1 })).await;
    for t in 1..=3u64 {
        let (status, value, _) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(json!({ "orders": [] }))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(value["state"]["t"], t);
    }
    let (status, state, _) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["burning"].as_array().unwrap().len(), 49);
    assert_eq!(state["burning"][0].as_array().unwrap().len(), 3);
    assert_eq!(state["contained"], false);
}

#[tokio::test]
async fn over_budget_order_is_a_conflict() {
    let app = app();
    let id = create(&app, json!({ "scenario": { "name": "single", "q": 2, "h": 1, "params": { "c": 1 } } })).await;
    let (_, before, _) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    let orders = json!({ "orders": [[5, 5, 1], [6, 5, 1]] });
    let (status, value, _) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(orders)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(value["error"].as_str().unwrap().contains("budget"));
    let (_, after, _) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn strict_sessions_refuse_orders_above_the_cap() {
    let app = app();
    let scenario = json!({ "name": "canonical", "q": 2, "h": 1, "params": { "c": 100 } });
    let id = create(&app, json!({ "scenario": scenario, "mode": "strict" })).await;
    let (_, state, _) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["strict_remaining"], 3);
    let orders: Vec<Value> = (0..4).map(|i| json!([1000 + i, 1000, 1])).collect();
    let (status, _, _) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(json!({ "orders": orders }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _, _) =
        call(&app, "POST", &format!("/sessions/{id}/step"), Some(json!({ "orders": &orders[..3] }))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn save_and_load_round_trip() {
    let app = app();
    let id = create(&app, json!({ "name": "canonical", "q": 1, "h": 2, "params": { "R": 4 } })).await;
    for orders in [json!([[0, 9, 1], [0, 9, 2]]), json!([]), json!([[1, 9, 1]])] {
        let (status, _, _) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(json!({ "orders": orders }))).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, save, _) = call(&app, "POST", &format!("/sessions/{id}/save"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(save["hashes"].as_array().unwrap().len(), 4);
    let copy = create(&app, json!({ "save": save })).await;
    assert_ne!(copy, id);
    let (_, _, a) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    let (_, _, b) = call(&app, "GET", &format!("/sessions/{copy}/state"), None).await;
    assert_eq!(a, b);

    let mut tampered = save.clone();
    tampered["hashes"][2] = json!("00");
    let (status, _, _) = call(&app, "POST", "/sessions", Some(json!({ "save": tampered }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn overlay_and_ledger() {
    let app = app();
    let id = create(&app, json!({ "name": "canonical", "q": 2, "h": 2, "params": { "R": 3 } })).await;
    call(&app, "POST", &format!("/sessions/{id}/step"), Some(json!({ "orders": [] }))).await;
    let (status, overlay, _) = call(&app, "GET", &format!("/sessions/{id}/overlay?x0=-3&y0=-3&x1=3&y1=3"), None).await;
    assert_eq!(status, StatusCode::OK, "{overlay}");
    assert!(overlay.is_object());
    let (status, rows, _) = call(&app, "GET", &format!("/sessions/{id}/ledger?from=1"), None).await;
    assert_eq!(status, StatusCode::OK);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r["t"] == 1));
    let (status, _, _) = call(&app, "GET", &format!("/sessions/{id}/ledger?from=5"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&app, "GET", &format!("/sessions/{id}/overlay?x0=1"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn plain_fires_have_no_overlay() {
    let app = app();
    let id = create(&app, json!({ "name": "single", "q": 1, "h": 1 })).await;
    let (status, _, _) = call(&app, "GET", &format!("/sessions/{id}/overlay"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, state, _) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert!(state["fronts"].is_null());
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let app = app();
    for (method, uri) in [
        ("GET", "/sessions/nope/state"),
        ("GET", "/sessions/nope/overlay"),
        ("GET", "/sessions/nope/ledger"),
        ("POST", "/sessions/nope/save"),
    ] {
        let (status, _, _) = call(&app, method, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{method} {uri}");
    }
    let (status, _, _) = call(&app, "POST", "/sessions/nope/step", Some(json!({ "orders": [] }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bad_scenarios_are_rejected() {
    let app = app();
    let (status, _, _) = call(&app, "POST", "/sessions", Some(json!({ "name": "pyramid", "q": 2, "h": 5 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _, _) = call(&app, "POST", "/sessions", Some(json!({ "nothing": 1 }))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn sessions_are_isolated_under_concurrent_steps() {
    let app = app();
    let a = create(&app, json!({ "name": "single", "q": 2, "h": 2 })).await;
    let b = create(&app, json!({ "name": "single", "q": 1, "h": 2 })).await;
    let mut handles = Vec::new();
    for _ in 0..5 {
        for id in [a.clone(), b.clone()] {
            let app = app.clone();
            handles.push(tokio::spawn(async move {
                call(&app, "POST", &format!("/sessions/{id}/step"), Some(json!({ "orders": [] }))).await.0
            }));
        }
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    let (_, sa, _) = call(&app, "GET", &format!("/sessions/{a}/state"), None).await;
    let (_, sb, _) = call(&app, "GET", &format!("/sessions/{b}/state"), None).await;
    assert_eq!(sa["t"], 5);
    assert_eq!(sb["t"], 5);
    // Layer 1 fire reaches layer 2 after one turn: king squares and grid
    // diamonds, shifted by one turn.
    assert_eq!(sa["burning"].as_array().unwrap().len(), 121 + 81);
    assert_eq!(sb["burning"].as_array().unwrap().len(), 61 + 41);
}
