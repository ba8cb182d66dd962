//! JSON-over-HTTP routes under `/v1`.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use checktrim_core::corpus::LabelMode;
use checktrim_core::dedup::{Decision, Tier};
use checktrim_core::triage::Priority;
use serde::{Deserialize, Serialize};

use crate::service::{ConfigPatch, Page, PairFilter, ReviewService, WhatIfQuery};
use crate::ServiceError;

pub type AppState = Arc<RwLock<ReviewService>>;

pub const TOTAL_COUNT_HEADER: &str = "x-total-count";

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) | ServiceError::NotLoaded(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

type Params = Query<HashMap<String, String>>;

fn param<T: FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ServiceError>
where
    T::Err: std::fmt::Display,
{
    match q.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|e| ServiceError::BadRequest(format!("{key}: {e}"))),
    }
}

fn unit_param(q: &HashMap<String, String>, key: &str) -> Result<Option<f64>, ServiceError> {
    let v: Option<f64> = param(q, key)?;
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => Err(ServiceError::BadRequest(format!("{key} = {x} is outside [0, 1]"))),
        _ => Ok(v),
    }
}

fn paged<T: Serialize>(page: Page<T>) -> Response {
    let total = HeaderValue::from(page.total);
    let mut resp = Json(page).into_response();
    resp.headers_mut().insert(HeaderName::from_static(TOTAL_COUNT_HEADER), total);
    resp
}

fn read(state: &AppState) -> std::sync::RwLockReadGuard<'_, ReviewService> {
    state.read().unwrap_or_else(|p| p.into_inner())
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    b.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn summary(State(state): State<AppState>) -> Response {
    Json(read(&state).summary()).into_response()
}

async fn list_pairs(State(state): State<AppState>, Query(q): Params) -> Result<Response, ServiceError> {
    let filter = PairFilter {
        tier: param::<Tier>(&q, "tier")?,
        decision: param::<Decision>(&q, "decision")?,
        page: param(&q, "page")?,
        page_size: param(&q, "page_size")?,
    };
    Ok(paged(read(&state).pairs(&filter)?))
}

#[derive(Debug, Deserialize)]
struct DecisionBody {
    decision: String,
    #[serde(default)]
    actor: String,
}

async fn decide_pair(
    State(state): State<AppState>,
    UrlPath((id_a, id_b)): UrlPath<(String, String)>,
    req: Result<Json<DecisionBody>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let req = body(req)?;
    let decision: Decision = req.decision.parse().map_err(ServiceError::BadRequest)?;
    if decision == Decision::Pending {
        return Err(ServiceError::BadRequest("decision must be accept or reject".into()));
    }
    let mut svc = state.write().unwrap_or_else(|p| p.into_inner());
    let (pair, _changed) = svc.decide(&id_a, &id_b, decision, &req.actor)?;
    Ok(Json(pair).into_response())
}

async fn whatif(State(state): State<AppState>, Query(q): Params) -> Result<Response, ServiceError> {
    let query = WhatIfQuery {
        t: unit_param(&q, "t")?,
        label_mode: param::<LabelMode>(&q, "label")?,
        pass_threshold: unit_param(&q, "pass_threshold")?,
    };
    Ok(Json(read(&state).whatif(&query)?).into_response())
}

async fn priorities(State(state): State<AppState>, Query(q): Params) -> Result<Response, ServiceError> {
    let level = param::<Priority>(&q, "level")?;
    Ok(paged(read(&state).priorities(level, param(&q, "page")?, param(&q, "page_size")?)?))
}

async fn get_config(State(state): State<AppState>) -> Response {
    Json(read(&state).config().clone()).into_response()
}

#[derive(Debug, Deserialize)]
struct ConfigBody {
    #[serde(flatten)]
    patch: ConfigPatch,
    #[serde(default)]
    actor: String,
}

async fn put_config(State(state): State<AppState>, req: Result<Json<ConfigBody>, JsonRejection>) -> Result<Response, ServiceError> {
    let req = body(req)?;
    let mut svc = state.write().unwrap_or_else(|p| p.into_inner());
    Ok(Json(svc.set_config(&req.patch, &req.actor)?).into_response())
}

async fn decision_log(State(state): State<AppState>, Query(q): Params) -> Result<Response, ServiceError> {
    let after: u64 = param(&q, "after")?.unwrap_or(0);
    let limit: usize = param(&q, "limit")?.unwrap_or(1000).min(10_000);
    Ok(Json(read(&state).log_page(after, limit)).into_response())
}

async fn not_found() -> ServiceError {
    ServiceError::NotFound("route".into())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/state", get(summary))
        .route("/v1/pairs", get(list_pairs))
        .route("/v1/pairs/{id_a}/{id_b}/decision", post(decide_pair))
        .route("/v1/whatif", get(whatif))
        .route("/v1/priorities", get(priorities))
        .route("/v1/config", get(get_config).put(put_config))
        .route("/v1/log", get(decision_log))
        .fallback(not_found)
        .with_state(state)
}

/// Serve the dataset in `dir` until interrupted.
pub async fn serve(dir: &Path, port: u16) -> Result<(), ServiceError> {
    let svc = ReviewService::open(dir)?;
    let summary = svc.summary();
    log::info!("loaded {} checks, {:?} pairs, log at sequence {}", summary.n_checks, summary.pairs, summary.last_seq);
    let app = router(Arc::new(RwLock::new(svc)));
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
