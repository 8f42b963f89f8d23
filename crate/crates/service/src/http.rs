//! JSON over HTTP. Annotator-facing routes are open; experiment setup,
//! reports and exports need the admin bearer token because they expose
//! every annotator's labels.

use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use hsa_core::agreement::AgreementError;
use hsa_core::scheme::SchemeError;
use hsa_core::store::StoreError;

use crate::config::ExperimentConfig;
use crate::service::{AnnotatorProfile, Service, ServiceError, Submission};

struct AppState {
    service: Mutex<Service>,
    admin_token: String,
}

type Shared = Arc<AppState>;

pub fn router(service: Service, admin_token: impl Into<String>) -> Router {
    let state = Arc::new(AppState { service: Mutex::new(service), admin_token: admin_token.into() });
    Router::new()
        .route("/experiments", post(create_experiment))
        .route("/annotators", post(register))
        .route("/tasks/next", get(next_task))
        .route("/annotations", post(submit))
        .route("/reports/{experiment}", get(report))
        .route("/export", get(export))
        .with_state(state)
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

fn violations(v: &[hsa_core::scheme::GatingViolation]) -> Value {
    v.iter().map(|x| json!({ "field": x.field(), "message": x.to_string() })).collect()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use ServiceError as E;
        let message = self.0.to_string();
        let (status, kind, extra) = match &self.0 {
            E::UnknownExperiment(_) => (StatusCode::NOT_FOUND, "unknown_experiment", json!({})),
            E::ExperimentExists(_) => (StatusCode::CONFLICT, "experiment_exists", json!({})),
            E::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "invalid_config", json!({})),
            E::InvalidProfile(_) => (StatusCode::BAD_REQUEST, "invalid_profile", json!({})),
            E::ProfileConflict(_) => (StatusCode::CONFLICT, "profile_conflict", json!({})),
            E::Capacity(_) => (StatusCode::CONFLICT, "capacity", json!({})),
            E::Unassigned(_) => (StatusCode::FORBIDDEN, "unassigned", json!({})),
            E::ConsentRequired(_) => (StatusCode::FORBIDDEN, "consent_required", json!({})),
            E::TaskNotOpen { open, .. } => (StatusCode::CONFLICT, "task_not_open", json!({ "open": open })),
            E::WrongArm(_) => (StatusCode::BAD_REQUEST, "wrong_arm", json!({})),
            E::Gating(v) => (StatusCode::UNPROCESSABLE_ENTITY, "gating", json!({ "violations": violations(v) })),
            E::Store(StoreError::Invalid(v)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "gating", json!({ "violations": violations(v) }))
            }
            E::Routing { next, .. } => (StatusCode::CONFLICT, "routing", json!({ "next": next })),
            E::Pending(p) => (StatusCode::CONFLICT, "pending_annotators", json!({ "pending": p })),
            E::Agreement(AgreementError::Scheme(SchemeError::UnknownGroup(g))) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "unknown_group", json!({ "group": g }))
            }
            E::Store(_) | E::Agreement(_) | E::Sampling(_) | E::State { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal", json!({}))
            }
        };
        let mut body = json!({ "error": kind, "message": message });
        if let (Value::Object(b), Value::Object(x)) = (&mut body, extra) {
            b.extend(x);
        }
        (status, Json(body)).into_response()
    }
}

fn unauthorized() -> Response {
    (StatusCode::UNAUTHORIZED, Json(json!({ "error": "unauthorized", "message": "admin token required" }))).into_response()
}

fn is_admin(state: &AppState, headers: &HeaderMap) -> bool {
    headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == state.admin_token)
}

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, Service> {
    state.service.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn create_experiment(State(state): State<Shared>, headers: HeaderMap, Json(config): Json<ExperimentConfig>) -> Response {
    if !is_admin(&state, &headers) {
        return unauthorized();
    }
    let id = config.id.clone();
    let items = config.manifest.selected_ids().len();
    match lock(&state).create_experiment(config) {
        Ok(()) => (StatusCode::CREATED, Json(json!({ "id": id, "items": items }))).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

#[derive(Deserialize)]
struct RegisterRequest {
    experiment: String,
    annotator_id: String,
    gender: String,
    age_band: String,
    #[serde(default)]
    consent: bool,
}

async fn register(State(state): State<Shared>, Json(req): Json<RegisterRequest>) -> Result<Response, ApiError> {
    let profile =
        AnnotatorProfile { annotator_id: req.annotator_id, gender: req.gender, age_band: req.age_band, consent: req.consent };
    let reg = lock(&state).register(&req.experiment, profile)?;
    Ok((StatusCode::CREATED, Json(reg)).into_response())
}

#[derive(Deserialize)]
struct TaskQuery {
    annotator: String,
}

async fn next_task(State(state): State<Shared>, Query(q): Query<TaskQuery>) -> Result<Response, ApiError> {
    let task = lock(&state).next_task(&q.annotator)?;
    Ok(Json(task).into_response())
}

async fn submit(State(state): State<Shared>, Json(sub): Json<Submission>) -> Result<Response, ApiError> {
    let outcome = lock(&state).submit(sub)?;
    Ok(Json(outcome).into_response())
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    force: bool,
}

async fn report(
    State(state): State<Shared>,
    headers: HeaderMap,
    Path(experiment): Path<String>,
    Query(q): Query<ReportQuery>,
) -> Response {
    if !is_admin(&state, &headers) {
        return unauthorized();
    }
    match lock(&state).report(&experiment, q.force) {
        Ok(r) => Json(r).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

#[derive(Deserialize)]
struct ExportQuery {
    experiment: String,
}

async fn export(State(state): State<Shared>, headers: HeaderMap, Query(q): Query<ExportQuery>) -> Response {
    if !is_admin(&state, &headers) {
        return unauthorized();
    }
    match lock(&state).dataset(&q.experiment) {
        Ok(d) => Json(d).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}
