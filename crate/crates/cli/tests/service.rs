//! HTTP endpoints exercised in-process against the fixture dataset.

use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use frontierlab_cli::app::{Dataset, Needs};
use frontierlab_cli::config::{resolve, Overrides};
use frontierlab_cli::fixtures::{fixture_path, CONFIG_FILE};
use frontierlab_cli::service::{router, state};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    let config = resolve(Some(Path::new(&fixture_path(CONFIG_FILE))), Overrides::default()).unwrap();
    router(state(Dataset::load(config, Needs::ALL).unwrap()))
}

async fn call(app: &Router, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn json_call(app: &Router, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, path, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[tokio::test]
async fn health_and_assets() {
    let app = app();
    let (status, body) = json_call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let (status, body) = json_call(&app, "GET", "/assets", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["tickers"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn optimize_respects_cap_and_budget() {
    let app = app();
    let (status, body) = json_call(&app, "POST", "/optimize", Some(json!({"bounds": {"max_weight": 0.15}}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let w = floats(&body["weights"]["w"]);
    assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    assert!(w.iter().all(|x| *x <= 0.15 + 1e-9 && *x >= -1e-9));
    assert!(body["kkt_max_residual"].as_f64().unwrap() <= 1e-6);
    assert!(body["provenance"]["config_hash"].is_string());
}

#[tokio::test]
async fn crossed_bounds_are_rejected_naming_the_asset() {
    let app = app();
    let req = json!({"bounds": {"lower": {"AAPL": 0.5}, "upper": {"AAPL": 0.2}}});
    let (status, body) = json_call(&app, "POST", "/optimize", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"]["reason"].as_str().unwrap().contains("AAPL"), "{body}");
    assert_eq!(body["error"]["category"], "invalid_input");
}

#[tokio::test]
async fn malformed_and_unknown_fields_are_bad_requests() {
    let app = app();
    let req = Request::builder()
        .method("POST")
        .uri("/optimize")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(
        app.clone().oneshot(req).await.unwrap().status(),
        StatusCode::BAD_REQUEST
    );
    let (status, _) = json_call(&app, "POST", "/frontier", Some(json!({"pointz": 5}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = json_call(
        &app,
        "POST",
        "/optimize",
        Some(json!({"bounds": {"upper": {"NOPE": 0.2}}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"]["reason"].as_str().unwrap().contains("NOPE"));
}

#[tokio::test]
async fn infeasible_bounds_are_unprocessable() {
    let app = app();
    let (status, body) = json_call(&app, "POST", "/optimize", Some(json!({"bounds": {"max_weight": 0.05}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"]["category"], "infeasible");
}

#[tokio::test]
async fn frontier_comparison_has_no_violations() {
    let app = app();
    let (status, body) = json_call(
        &app,
        "POST",
        "/frontier",
        Some(json!({"bounds": {"max_weight": 0.15}, "points": 50})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["comparison"]["violations"], 0);
    assert_eq!(floats(&body["comparison"]["targets"]).len(), 50);
}

#[tokio::test]
async fn empty_views_leave_the_prior_unchanged() {
    let app = app();
    let (status, body) = json_call(&app, "POST", "/blacklitterman", Some(json!({"views": []}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(floats(&body["posterior"]["mu_bl"]), floats(&body["prior"]["pi"]));
    let w = floats(&body["weights"]["w"]);
    let market = floats(&body["prior"]["market_weights"]);
    for (a, b) in w.iter().zip(&market) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[tokio::test]
async fn text_and_structured_views_agree() {
    let app = app();
    let text = json!({"views": ["rel AAPL > GOOG by 0.02"]});
    let spec =
        json!({"views": [{"kind": "relative", "outperformer": "AAPL", "underperformer": "GOOG", "spread": 0.02}]});
    let (s1, a) = json_call(&app, "POST", "/blacklitterman", Some(text)).await;
    let (s2, b) = json_call(&app, "POST", "/blacklitterman", Some(spec)).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK), "{a} {b}");
    assert_eq!(a["posterior"], b["posterior"]);
}

#[tokio::test]
async fn simulation_is_reproducible_and_stateless() {
    let app = app();
    let req = json!({"config": {"samples": 5000, "seed": 7, "assets": ["AAPL", "GOOG", "TSLA", "XOM", "GS"]}});
    let (s1, first) = call(&app, "POST", "/simulate", Some(req.clone())).await;
    let (s2, _) = call(
        &app,
        "POST",
        "/simulate",
        Some(json!({"config": {"samples": 800, "seed": 99}})),
    )
    .await;
    let (s3, again) = call(&app, "POST", "/simulate", Some(req)).await;
    assert_eq!((s1, s2, s3), (StatusCode::OK, StatusCode::OK, StatusCode::OK));
    assert_eq!(first, again);
    let body: Value = serde_json::from_slice(&first).unwrap();
    assert!(body["relative_gap"].as_f64().unwrap() >= -1e-10);
}

#[tokio::test]
async fn regression_and_backtest_respond() {
    let app = app();
    let (status, body) = json_call(&app, "POST", "/regress", Some(json!({}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(floats(&body["ols"]["coefficients"]).len(), 6);

    let (status, body) = json_call(
        &app,
        "POST",
        "/backtest",
        Some(json!({"weights": {"AAPL": 0.5, "XOM": 0.5}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["max_drawdown"].as_f64().unwrap() <= 0.0);

    let (status, _) = json_call(&app, "POST", "/backtest", Some(json!({"weights": {"AAPL": 0.5}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
