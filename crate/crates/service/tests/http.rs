mod common;

use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use checktrim_core::dedup::Tier;
use checktrim_core::triage::TriageConfig;
use checktrim_service::{router, Dataset, ReviewService};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(RwLock::new(ReviewService::in_memory(common::dataset()).with_clock(common::fixed_clock))))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Option<String>, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let total = resp.headers().get("x-total-count").map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, total, value)
}

#[tokio::test]
async fn pairs_filtering_and_paging() {
    let app = app();
    let (s, total, v) = call(&app, "GET", "/v1/pairs?page_size=5", None).await;
    assert_eq!(s, StatusCode::OK);
    let n = common::pairs().len();
    assert_eq!(total.unwrap(), n.to_string());
    assert_eq!(v["items"].as_array().unwrap().len(), 5);
    assert_eq!(v["next_page"], 2);
    let sims: Vec<f64> = v["items"].as_array().unwrap().iter().map(|p| p["similarity"].as_f64().unwrap()).collect();
    assert!(sims.windows(2).all(|w| w[0] >= w[1]));

    let (_, _, v) = call(&app, "GET", "/v1/pairs?tier=identical&page_size=1000", None).await;
    let expected = common::pairs().iter().filter(|p| p.tier == Tier::Identical).count();
    assert_eq!(v["total"], expected);
    assert!(v["items"].as_array().unwrap().iter().all(|p| p["tier"] == "Identical"));

    let (_, _, v) = call(&app, "GET", "/v1/pairs?decision=accepted", None).await;
    assert_eq!(v["total"], 0);

    let (s, total, v) = call(&app, "GET", "/v1/pairs?page=999", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(total.unwrap(), n.to_string());
    assert!(v["items"].as_array().unwrap().is_empty());

    let (s, _, v) = call(&app, "GET", "/v1/pairs?tier=Huge", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("tier"));
    assert_eq!(call(&app, "GET", "/v1/pairs?page=0", None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn deciding_pairs() {
    let app = app();
    let (_, _, before) = call(&app, "GET", "/v1/state", None).await;
    assert_eq!(before["active"], common::N);

    let uri = "/v1/pairs/C-000/C-001/decision";
    let (s, _, p) = call(&app, "POST", uri, Some(json!({"decision": "accept", "actor": "ana"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(p["decision"], "accepted");
    assert_eq!(p["decided_by"], "ana");
    assert_eq!(p["decided_at"], common::fixed_clock());
    let (_, _, after) = call(&app, "GET", "/v1/state", None).await;
    assert_eq!(after["active"], common::N - 1);
    assert_eq!(after["last_seq"], 1);

    // same decision again: no-op
    let (s, _, _) = call(&app, "POST", uri, Some(json!({"decision": "accepted", "actor": "bo"}))).await;
    assert_eq!(s, StatusCode::OK);
    let (_, _, again) = call(&app, "GET", "/v1/state", None).await;
    assert_eq!(again["last_seq"], 1);
    assert_eq!(again["active"], common::N - 1);

    let (s, _, _) = call(&app, "POST", uri, Some(json!({"decision": "reject", "actor": "bo"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    // ids in either order
    let (s, _, p) = call(&app, "POST", "/v1/pairs/C-003/C-000/decision", Some(json!({"decision": "reject"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((p["id_a"].as_str(), p["decision"].as_str()), (Some("C-000"), Some("rejected")));

    let (s, _, _) = call(&app, "POST", "/v1/pairs/C-000/C-039/decision", Some(json!({"decision": "accept"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _, _) = call(&app, "POST", "/v1/pairs/C-002/C-003/decision", Some(json!({"decision": "maybe"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _, _) = call(&app, "POST", "/v1/pairs/C-002/C-003/decision", Some(json!({"actor": "x"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (_, _, v) = call(&app, "GET", "/v1/pairs?decision=accepted", None).await;
    assert_eq!(v["total"], 1);
    let (_, _, log) = call(&app, "GET", "/v1/log", None).await;
    assert_eq!(log.as_array().unwrap().len(), 2);
    assert_eq!(log[0]["action"], "accept_pair");
}

#[tokio::test]
async fn whatif_feedback() {
    let app = app();
    let (s, _, w0) = call(&app, "GET", "/v1/whatif?t=0", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(w0["trimmed_pct"], 0.0);

    let (_, _, a) = call(&app, "GET", "/v1/whatif?t=0.4", None).await;
    let (_, _, b) = call(&app, "GET", "/v1/whatif?t=0.5", None).await;
    assert!(b["trimmed_pct"].as_f64().unwrap() >= a["trimmed_pct"].as_f64().unwrap());
    let sum: f64 = ["trimmed_pct", "blocked_pct", "fail_pct", "duplicate_removed_pct"].iter().map(|k| b[k].as_f64().unwrap()).sum();
    assert!((sum - 100.0).abs() < 1e-9);

    call(&app, "POST", "/v1/pairs/C-004/C-005/decision", Some(json!({"decision": "accept"}))).await;
    let (_, _, c) = call(&app, "GET", "/v1/whatif?t=0.5", None).await;
    let delta = c["duplicate_removed_pct"].as_f64().unwrap() - b["duplicate_removed_pct"].as_f64().unwrap();
    assert!((delta - 100.0 / common::N as f64).abs() < 1e-12);
    assert_eq!(c["active"], common::N - 1);

    let (_, _, i) = call(&app, "GET", "/v1/whatif?label=ioq_only&pass_threshold=0.3", None).await;
    assert_eq!(i["label_mode"], "ioq_only");
    assert_eq!(i["pass_threshold"], 0.3);

    assert_eq!(call(&app, "GET", "/v1/whatif?t=1.5", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "GET", "/v1/whatif?t=abc", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "GET", "/v1/whatif?label=other", None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn config_updates_are_logged() {
    let app = app();
    let (s, _, c) = call(&app, "PUT", "/v1/config", Some(json!({"severity_t": 0.3, "actor": "ana"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(c["severity_t"], 0.3);
    assert_eq!(c["pass_threshold"], 0.5);
    let (_, _, w) = call(&app, "GET", "/v1/whatif", None).await;
    assert_eq!(w["t"], 0.3);
    assert_eq!(call(&app, "PUT", "/v1/config", Some(json!({"severity_t": 2.0}))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "PUT", "/v1/config", Some(json!({"actor": "ana"}))).await.0, StatusCode::BAD_REQUEST);
    let (_, _, log) = call(&app, "GET", "/v1/log?after=0", None).await;
    assert_eq!(log.as_array().unwrap().len(), 1);
    assert_eq!(log[0]["payload"], json!({"severity_t": 0.3}));
}

#[tokio::test]
async fn priority_worklists() {
    let app = app();
    let (s, total, v) = call(&app, "GET", "/v1/priorities?level=Level3&page_size=1000", None).await;
    assert_eq!(s, StatusCode::OK);
    let items = v["items"].as_array().unwrap();
    let expected = common::scores().iter().filter(|s| s.label_mode == checktrim_core::corpus::LabelMode::Throttled && s.p_pass <= 0.79).count();
    assert_eq!(total.unwrap(), expected.to_string());
    assert!(items.iter().all(|d| d["priority"] == "Level3" && d["p_pass"].as_f64().unwrap() <= 0.79));
    let ps: Vec<f64> = items.iter().map(|d| d["p_pass"].as_f64().unwrap()).collect();
    assert!(ps.windows(2).all(|w| w[0] <= w[1]));
    assert!(items.iter().any(|d| d["gap_band"] == true));
    assert_eq!(call(&app, "GET", "/v1/priorities?level=Level9", None).await.0, StatusCode::BAD_REQUEST);

    let empty = Dataset::new(Vec::<String>::new(), None, Vec::new(), TriageConfig::default()).unwrap();
    let app = router(Arc::new(RwLock::new(ReviewService::in_memory(empty))));
    let (s, _, v) = call(&app, "GET", "/v1/priorities", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["total"], 0);
    assert_eq!(call(&app, "GET", "/v1/pairs", None).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&app, "GET", "/v1/nope", None).await.0, StatusCode::NOT_FOUND);
}
