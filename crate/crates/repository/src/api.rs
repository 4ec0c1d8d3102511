use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde_json::{json, Value};

use rvse_core::engine::LogRecord;
use rvse_core::scenario::{checksum, parse_scenario, ParseError};

use crate::auth::{Principal, Role, TokenTable};
use crate::store::{Store, StoreError};

/// Header carrying the SHA-256 of fetched scenario bytes.
pub const CHECKSUM_HEADER: &str = "x-checksum-sha256";

pub struct AppState {
    pub store: Store,
    pub tokens: TokenTable,
    /// Print one line per request to stderr.
    pub log_requests: bool,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
    report: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self { status, code, detail: detail.into(), report: None }
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing, unknown or insufficient credentials")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "detail": self.detail });
        if let Some(r) = self.report {
            body["report"] = r;
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let detail = e.to_string();
        match e {
            StoreError::Parse(ParseError::MalformedDocument(_)) => {
                Self::new(StatusCode::BAD_REQUEST, "malformed_document", detail)
            }
            StoreError::Parse(ParseError::SchemaViolation { path, message }) => {
                Self::new(StatusCode::BAD_REQUEST, "schema_violation", format!("{path}: {message}"))
            }
            StoreError::ValidationFailed(report) => Self {
                report: Some(serde_json::to_value(&report).expect("report serializes")),
                ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", detail)
            },
            StoreError::NotOwner(_) => Self { detail, ..Self::unauthorized() },
            StoreError::NotFound => Self::new(StatusCode::NOT_FOUND, "not_found", detail),
            StoreError::UnknownScenario(..) => Self::new(StatusCode::NOT_FOUND, "unknown_scenario", detail),
            StoreError::OutOfOrder(_) => Self::new(StatusCode::CONFLICT, "out_of_order", detail),
            StoreError::BadBatch(_) => Self::new(StatusCode::BAD_REQUEST, "malformed_batch", detail),
            StoreError::Io(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "io_error", detail),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn authorize(state: &AppState, headers: &HeaderMap, roles: &[Role]) -> ApiResult<Principal> {
    let header = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
    match state.tokens.authenticate(header) {
        Some(p) if roles.contains(&p.role) => Ok(p.clone()),
        _ => Err(ApiError::unauthorized()),
    }
}

/// The HTTP API, mounted under `/api/v1`.
pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/scenarios", post(upload))
        .route("/catalog", get(catalog))
        .route("/scenarios/{id}/{version}", get(fetch))
        .route("/sessions/{session_id}/events", post(ingest))
        .route("/dashboards/learner/{learner_id}", get(learner))
        .route("/dashboards/cohort/{cohort_id}", get(cohort))
        .route("/alarms", get(alarms))
        .route("/media/{scenario_id}/{*path}", put(put_media).get(get_media));
    Router::new()
        .nest("/api/v1", api)
        .layer(middleware::from_fn_with_state(Arc::clone(&state), log_request))
        .with_state(state)
}

async fn log_request(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let (method, uri) = (req.method().clone(), req.uri().clone());
    let resp = next.run(req).await;
    if state.log_requests {
        eprintln!("{method} {} {}", uri.path(), resp.status().as_u16());
    }
    resp
}

async fn upload(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let who = authorize(&s, &headers, &[Role::Creator])?;
    let receipt = s.store.upload(&who.name, &body)?;
    Ok((StatusCode::CREATED, Json(receipt)).into_response())
}

async fn catalog(State(s): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Response> {
    authorize(&s, &headers, &[Role::Creator, Role::Tutor, Role::Learner])?;
    Ok(Json(s.store.catalog()).into_response())
}

async fn fetch(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Path((id, version)): Path<(String, String)>,
) -> ApiResult<Response> {
    authorize(&s, &headers, &[Role::Tutor, Role::Learner])?;
    let version: u64 = version.parse().map_err(|_| StoreError::NotFound)?;
    let bytes = s.store.fetch(&id, version)?;
    let sum = parse_scenario(&bytes).map(|sc| checksum(&sc)).map_err(StoreError::from)?;
    let mut resp = (StatusCode::OK, bytes).into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    h.insert(CHECKSUM_HEADER, HeaderValue::from_str(&sum).expect("hex is a valid header"));
    Ok(resp)
}

async fn ingest(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(session_id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let who = authorize(&s, &headers, &[Role::Learner])?;
    let batch: Vec<LogRecord> = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_batch", e.to_string()))?;
    let accepted = s.store.ingest(&session_id, &who, batch)?;
    Ok(Json(json!({ "accepted": accepted })).into_response())
}

async fn learner(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(learner_id): Path<String>,
) -> ApiResult<Response> {
    let who = authorize(&s, &headers, &[Role::Learner])?;
    if who.name != learner_id {
        return Err(ApiError::unauthorized());
    }
    let d = s.store.learner_dashboard(&learner_id).ok_or(StoreError::NotFound)?;
    Ok(Json(d).into_response())
}

async fn cohort(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(cohort_id): Path<String>,
) -> ApiResult<Response> {
    authorize(&s, &headers, &[Role::Tutor])?;
    Ok(Json(s.store.cohort_dashboards(&cohort_id)).into_response())
}

async fn alarms(State(s): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult<Response> {
    let who = authorize(&s, &headers, &[Role::Creator])?;
    Ok(Json(s.store.alarms_for(&who.name)).into_response())
}

async fn put_media(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Path((scenario_id, path)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    let who = authorize(&s, &headers, &[Role::Creator])?;
    s.store.put_media(&who.name, &scenario_id, &path, &body)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn get_media(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Path((scenario_id, path)): Path<(String, String)>,
) -> ApiResult<Response> {
    authorize(&s, &headers, &[Role::Creator, Role::Tutor, Role::Learner])?;
    let bytes = s.store.get_media(&scenario_id, &path)?;
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"))],
        bytes,
    )
        .into_response())
}
