//! JSON HTTP API over a shared, read-only pipeline. The ratings file is the
//! only state that changes while serving.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query as QueryParams, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use iral_core::evaluator::{EvalError, Judgments, Rating, RatingStore};
use iral_core::pipeline::PipelineError;
use iral_core::query::QueryError;
use iral_core::{Pipeline, WeightVector};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::views::{CompareResponse, SearchResponse};

pub struct AppState {
    pub pipeline: Pipeline,
    pub ratings: Arc<RatingStore>,
    pub judgments: Option<Judgments>,
    pub default_k: usize,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        Self {
            status,
            message: message.to_string(),
        }
    }

    fn bad_request(message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Query(QueryError::EmptyQuery) | PipelineError::UnknownEngine(_) => {
                StatusCode::BAD_REQUEST
            }
            PipelineError::AllBackendsFailed(_) => StatusCode::BAD_GATEWAY,
            PipelineError::Rank(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

fn resolve_k(k: Option<usize>, default: usize) -> Result<usize, ApiError> {
    match k {
        Some(0) => Err(ApiError::bad_request("k must be at least 1")),
        Some(k) => Ok(k),
        None => Ok(default),
    }
}

fn require_query(q: Option<String>) -> Result<String, ApiError> {
    q.ok_or_else(|| ApiError::bad_request("missing q"))
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    q: Option<String>,
    k: Option<usize>,
    /// URL-encoded JSON object of weight overrides.
    weights: Option<String>,
}

/// Parses a weights override object; keys it does not mention keep `base`.
pub fn parse_weight_overrides(raw: &str, base: &WeightVector) -> Result<WeightVector, String> {
    let overrides: BTreeMap<String, f64> =
        serde_json::from_str(raw).map_err(|e| format!("weights: {e}"))?;
    base.with_overrides(&overrides).map_err(|e| e.to_string())
}

async fn search(
    State(state): State<Arc<AppState>>,
    QueryParams(p): QueryParams<SearchParams>,
) -> Result<Json<SearchResponse>, ApiError> {
    let q = require_query(p.q)?;
    let k = resolve_k(p.k, state.default_k)?;
    let weights = p
        .weights
        .as_deref()
        .map(|raw| parse_weight_overrides(raw, &state.pipeline.weights))
        .transpose()
        .map_err(ApiError::bad_request)?;
    let outcome = state.pipeline.search(&q, k, weights.as_ref()).await?;
    Ok(Json(SearchResponse::from(&outcome)))
}

#[derive(Debug, Deserialize)]
pub struct CompareParams {
    q: Option<String>,
    k: Option<usize>,
    /// Comma-separated engine ids.
    engines: Option<String>,
}

async fn compare(
    State(state): State<Arc<AppState>>,
    QueryParams(p): QueryParams<CompareParams>,
) -> Result<Json<CompareResponse>, ApiError> {
    let q = require_query(p.q)?;
    let k = resolve_k(p.k, state.default_k)?;
    let engines: Option<Vec<String>> = p.engines.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|e| !e.is_empty())
            .map(str::to_string)
            .collect()
    });
    let outcome = state.pipeline.compare(&q, k, engines.as_deref()).await?;
    Ok(Json(CompareResponse::from(&outcome)))
}

#[derive(Debug, Deserialize)]
struct FeedbackPayload {
    query: String,
    #[serde(alias = "system")]
    system_id: String,
    score: i64,
}

async fn feedback(State(state): State<Arc<AppState>>, body: Bytes) -> Result<StatusCode, ApiError> {
    let value: serde_json::Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))?;
    let payload: FeedbackPayload = serde_json::from_value(value)
        .map_err(|e| ApiError::bad_request(format!("bad rating payload: {e}")))?;
    let score = u8::try_from(payload.score)
        .ok()
        .filter(|s| (1..=5).contains(s))
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("score {} outside 1..5", payload.score),
            )
        })?;
    let rating = Rating {
        query: payload.query,
        system_id: payload.system_id,
        score,
        timestamp: chrono::Utc::now(),
    };
    let store = state.ratings.clone();
    let written = tokio::task::spawn_blocking(move || store.record_rating(&rating))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    match written {
        Ok(_) => Ok(StatusCode::NO_CONTENT),
        Err(e @ EvalError::InvalidRating(_)) => {
            Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))
        }
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e)),
    }
}

#[derive(Debug, Deserialize)]
pub struct EvalParams {
    k: Option<usize>,
}

async fn eval(
    State(state): State<Arc<AppState>>,
    QueryParams(p): QueryParams<EvalParams>,
) -> Result<Response, ApiError> {
    let Some(judgments) = &state.judgments else {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "no judgments configured",
        ));
    };
    let k = p.k.map(|k| resolve_k(Some(k), k)).transpose()?;
    let table = state.pipeline.evaluate(judgments, k).await?;
    Ok(Json(table).into_response())
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/search", get(search))
        .route("/api/compare", get(compare))
        .route("/api/feedback", post(feedback))
        .route("/api/eval", get(eval))
        .route("/healthz", get(healthz))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
