use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;

use super::{JobStatus, QueryRequest, Scheduler, Service, ServiceError, MODEL_TFIDF};

/// Environment variable holding the token required by `POST /api/v1/classify`.
pub const OPERATOR_TOKEN_ENV: &str = "GIMLI_OPERATOR_TOKEN";

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<Service>,
    pub scheduler: Scheduler,
    /// `None` disables the classify endpoint.
    pub operator_token: Option<String>,
}

impl AppState {
    pub fn new(service: Arc<Service>, scheduler: Scheduler) -> Self {
        Self {
            service,
            scheduler,
            operator_token: std::env::var(OPERATOR_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        }
    }

    pub fn with_operator_token(mut self, token: Option<String>) -> Self {
        self.operator_token = token;
        self
    }
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    field: Option<&'static str>,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, field: Option<&'static str>, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            field,
            message: message.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let message = e.to_string();
        let (status, code, field) = match &e {
            ServiceError::UnknownProject(_) => (StatusCode::NOT_FOUND, "unknown_project", Some("project")),
            ServiceError::UnknownLabel(_) => (StatusCode::BAD_REQUEST, "unknown_label", Some("labels")),
            ServiceError::EmptyLabels => (StatusCode::BAD_REQUEST, "empty_labels", Some("labels")),
            ServiceError::UnsupportedModel(_) => (StatusCode::BAD_REQUEST, "unsupported_model", Some("model")),
            ServiceError::MissingParameter(p) => (
                StatusCode::BAD_REQUEST,
                "missing_parameter",
                match p.as_str() {
                    "project" => Some("project"),
                    "labels" => Some("labels"),
                    _ => None,
                },
            ),
            ServiceError::StoreUnavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "store_unavailable", None),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", None),
        };
        Self::new(status, code, field, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/projects", get(projects))
        .route("/api/v1/issues", get(issues))
        .route("/api/v1/health", get(health))
        .route("/api/v1/classify", post(classify))
        .with_state(state)
}

/// Serve the API on `listener` until `shutdown` resolves.
pub async fn serve<F>(listener: tokio::net::TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn projects(State(state): State<AppState>) -> Json<Vec<super::ProjectInfo>> {
    Json(state.service.catalog())
}

async fn issues(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<super::QueryResponse>, ApiError> {
    let project = params
        .get("project")
        .ok_or_else(|| ServiceError::MissingParameter("project".into()))?;
    let labels = params
        .get("labels")
        .ok_or_else(|| ServiceError::MissingParameter("labels".into()))?;
    let req = QueryRequest {
        project: project.clone(),
        labels: QueryRequest::parse_labels(labels),
        model: params.get("model").cloned().unwrap_or_else(|| MODEL_TFIDF.to_string()),
    };
    let service = Arc::clone(&state.service);
    let resp = tokio::task::spawn_blocking(move || service.query(&req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", None, e.to_string()))??;
    Ok(Json(resp))
}

#[derive(Serialize)]
struct ProjectHealth {
    #[serde(flatten)]
    job: JobStatus,
    stored_issues: Option<usize>,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    projects: BTreeMap<String, ProjectHealth>,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let jobs = state.scheduler.status();
    let mut projects = BTreeMap::new();
    for label in state.service.project_labels() {
        let stored_issues = state.service.store().count(&label).ok();
        projects.insert(
            label.clone(),
            ProjectHealth {
                job: jobs.get(&label).cloned().unwrap_or_default(),
                stored_issues,
            },
        );
    }
    Json(Health { status: "ok", projects })
}

fn presented_token(headers: &HeaderMap) -> Option<&str> {
    if let Some(v) = headers.get("x-operator-token").and_then(|v| v.to_str().ok()) {
        return Some(v.trim());
    }
    headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
}

fn tokens_equal(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn classify(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let Some(expected) = state.operator_token.as_deref() else {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "classify_disabled",
            None,
            format!("set {OPERATOR_TOKEN_ENV} to enable manual classification"),
        ));
    };
    if !presented_token(&headers).is_some_and(|t| tokens_equal(t, expected)) {
        return Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            None,
            "missing or invalid operator token",
        ));
    }
    let project = params
        .get("project")
        .ok_or_else(|| ServiceError::MissingParameter("project".into()))?;
    state.service.project(project)?;
    match state.scheduler.trigger(project) {
        None => Err(ServiceError::UnknownProject(project.clone()).into()),
        Some(None) => Ok((
            StatusCode::CONFLICT,
            Json(json!({"project": project, "status": "already_running"})),
        )
            .into_response()),
        Some(Some(handle)) => match handle.await {
            Ok(Ok(rows)) => Ok(Json(json!({"project": project, "status": "ok", "rows": rows})).into_response()),
            Ok(Err(e)) => Err(ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "classification_failed",
                None,
                e,
            )),
            Err(e) => Err(ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "internal",
                None,
                e.to_string(),
            )),
        },
    }
}
