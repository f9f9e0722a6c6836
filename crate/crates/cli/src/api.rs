//! Local HTTP JSON API over [`Service`].
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | POST | `/users` | `{"user_id", "task"?, "method"?}` | 201 user status |
//! | POST | `/users/{id}/enroll` | trace document | 200 enrollment progress |
//! | POST | `/users/{id}/verify?method=&adapt=` | trace document | 200 decision |
//! | GET | `/users/{id}/status` | | 200 user status |
//! | GET | `/users/{id}/export` | | 200 user record |
//! | POST | `/users/import` | user record | 201 user status |
//! | POST | `/admin/evaluate` | `{"cohort_dir"}` or `{"synth": {...}}` | 200 report |

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use hapass_core::evaluation::{load_cohort, run_protocol, EvalError, ProtocolConfig};
use hapass_core::matcher::Method;
use hapass_core::service::{Service, ServiceError};
use hapass_core::synth::{generate_cohort, Preset, SynthConfig};
use hapass_core::trace::{parse_trace, Task, TraceError};

#[derive(Debug)]
pub enum ApiError {
    Service(ServiceError),
    Trace(TraceError),
    Eval(EvalError),
    BadRequest(String),
    Internal(String),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

fn service_status(e: &ServiceError) -> (StatusCode, &'static str) {
    match e {
        ServiceError::UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
        ServiceError::UserExists(_) => (StatusCode::CONFLICT, "user_exists"),
        ServiceError::AlreadyEnrolled(_) => (StatusCode::CONFLICT, "already_enrolled"),
        ServiceError::NotEnrolled { .. } => (StatusCode::CONFLICT, "not_enrolled"),
        ServiceError::MethodMismatch { .. } => (StatusCode::CONFLICT, "method_mismatch"),
        ServiceError::InvalidUserId(_) => (StatusCode::BAD_REQUEST, "invalid_user_id"),
        ServiceError::TaskMismatch { .. } => (StatusCode::BAD_REQUEST, "task_mismatch"),
        ServiceError::SchemaMismatch { .. } => (StatusCode::BAD_REQUEST, "schema_mismatch"),
        ServiceError::LayoutMigration { .. } => (StatusCode::BAD_REQUEST, "layout_migration"),
        ServiceError::InvalidDocument(_) | ServiceError::Match(_) | ServiceError::Feature(_) => {
            (StatusCode::BAD_REQUEST, "invalid_document")
        }
        ServiceError::Io(_) | ServiceError::Corrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, message) = match &self {
            ApiError::Service(e) => {
                let (s, k) = service_status(e);
                (s, k, e.to_string())
            }
            ApiError::Trace(e) => (StatusCode::BAD_REQUEST, "invalid_trace", e.to_string()),
            ApiError::Eval(e @ EvalError::Io(_)) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
            ApiError::Eval(e) => (StatusCode::BAD_REQUEST, "invalid_cohort", e.to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m.clone()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m.clone()),
        };
        (status, Json(json!({ "error": kind, "message": message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateUser {
    user_id: String,
    task: Option<Task>,
    method: Option<Method>,
}

#[derive(Debug, Deserialize)]
struct VerifyQuery {
    method: Option<Method>,
    #[serde(default)]
    adapt: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthRequest {
    seed: u64,
    #[serde(default)]
    preset: Preset,
    users: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    cohort_dir: Option<PathBuf>,
    synth: Option<SynthRequest>,
    methods: Option<Vec<Method>>,
    task: Option<Task>,
    fmr_target: Option<f64>,
}

fn json_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn create_user(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<Response> {
    let req: CreateUser = json_body(&body)?;
    let status = blocking(move || Ok(svc.create_user(&req.user_id, req.task, req.method)?)).await?;
    Ok((StatusCode::CREATED, Json(status)).into_response())
}

async fn enroll(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let trace = parse_trace(&body).map_err(ApiError::Trace)?;
    let progress = blocking(move || Ok(svc.enroll(&id, &trace)?)).await?;
    Ok(Json(progress).into_response())
}

async fn verify(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    query: Result<Query<VerifyQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let trace = parse_trace(&body).map_err(ApiError::Trace)?;
    let outcome = blocking(move || Ok(svc.verify(&id, &trace, q.method, q.adapt)?)).await?;
    Ok(Json(outcome).into_response())
}

async fn status(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let status = blocking(move || Ok(svc.status(&id)?)).await?;
    Ok(Json(status).into_response())
}

async fn export(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let doc = blocking(move || Ok(svc.export_user(&id)?)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], doc).into_response())
}

async fn import(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<Response> {
    let text = String::from_utf8(body.to_vec()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let status = blocking(move || Ok(svc.import_user(&text)?)).await?;
    Ok((StatusCode::CREATED, Json(status)).into_response())
}

async fn evaluate(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<Response> {
    let req: EvaluateRequest = json_body(&body)?;
    let report = blocking(move || {
        let cfg = svc.config();
        let cohort = match (&req.cohort_dir, &req.synth) {
            (Some(dir), None) => load_cohort(dir).map_err(ApiError::Eval)?,
            (None, Some(s)) => {
                let synth = SynthConfig {
                    preset: s.preset,
                    users: s.users.unwrap_or(cfg.synth.users),
                    ..cfg.synth.clone()
                };
                generate_cohort(s.seed, &synth).map_err(|e| ApiError::BadRequest(e.to_string()))?.cohort
            }
            _ => return Err(ApiError::BadRequest("give exactly one of cohort_dir or synth".into())),
        };
        let mut protocol: ProtocolConfig = cfg.protocol();
        if let Some(m) = req.methods {
            protocol.methods = m;
        }
        protocol.task = req.task;
        if let Some(f) = req.fmr_target {
            protocol.fmr_target = f;
        }
        run_protocol(&cohort, &protocol).map_err(ApiError::Eval)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], report.to_json()).into_response())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/users", post(create_user))
        .route("/users/import", post(import))
        .route("/users/{id}/enroll", post(enroll))
        .route("/users/{id}/verify", post(verify))
        .route("/users/{id}/status", get(status))
        .route("/users/{id}/export", get(export))
        .route("/admin/evaluate", post(evaluate))
        .with_state(service)
}
