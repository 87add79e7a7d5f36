//! `api-v1` HTTP routes.

use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use super::{Service, ServiceError, API_FORMAT};
use crate::graph::Verdict;
use crate::ingest::EvidenceItem;
use crate::reasoner::Recommendation;

/// Placeholder page when no built console is configured.
const CONSOLE_PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>EAFD reviewer console</title></head>\n<body><h1>EAFD reviewer console</h1><p>The console bundle is not installed. Start the server with <code>--console-dir</code> pointing at the built assets. The JSON API is available under <code>/cases</code>.</p></body></html>\n";

#[derive(Serialize)]
struct ErrorBody<'a> {
    format: &'a str,
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<&'a str>,
}

fn error_kind(e: &ServiceError) -> &'static str {
    match e {
        ServiceError::MalformedRecord(_) | ServiceError::BadRequest(_) => "malformed",
        ServiceError::DuplicateCase(_) => "duplicate_case",
        ServiceError::UnknownCase(_) => "unknown_case",
        ServiceError::WrongState { .. } => "wrong_state",
        ServiceError::DuplicateEvidenceId(_) => "duplicate_evidence_id",
        ServiceError::Pipeline(_) => "pipeline_failure",
        ServiceError::Kb(crate::kb::KbError::DuplicateCaseId(_)) => "duplicate_case",
        ServiceError::Kb(_) if e.status() == 400 => "malformed",
        ServiceError::Kb(_) => "kb_failure",
        ServiceError::Session(_) => "session_failure",
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let stage = self.stage();
        let body = ErrorBody {
            format: API_FORMAT,
            error: error_kind(&self),
            message: self.to_string(),
            stage: stage.map(|s| s.as_str()),
        };
        (status, json_body(&body)).into_response()
    }
}

fn json_body<T: Serialize>(value: &T) -> Response {
    match crate::json::to_canonical(value) {
        Ok(text) => ([(header::CONTENT_TYPE, "application/json")], text).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn ok_json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let mut r = json_body(value);
    *r.status_mut() = status;
    r
}

/// Body of `POST /cases/{id}/evidence`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvidenceRequest {
    pub evidence_items: Vec<EvidenceItem>,
}

/// Body of `POST /cases/{id}/close`; empty bodies are accepted.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CloseRequest {
    #[serde(default)]
    pub final_verdict: Option<Verdict>,
}

#[derive(Serialize)]
struct RecommendationsView<'a> {
    format: &'a str,
    case_id: &'a str,
    verdict: Option<Verdict>,
    recommendations: Vec<Recommendation>,
}

#[derive(Serialize)]
struct ListView {
    format: &'static str,
    sessions: Vec<super::SessionSummary>,
}

#[derive(Serialize)]
struct IngestView {
    format: &'static str,
    case_id: String,
    count: usize,
}

fn parse_json<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

type Shared = Arc<Service>;

/// Run blocking service work off the async executor.
async fn blocking<T, F>(svc: Shared, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .unwrap_or_else(|e| Err(ServiceError::BadRequest(format!("worker failed: {e}"))))
}

async fn submit(State(svc): State<Shared>, body: Bytes) -> Response {
    match blocking(svc, move |s| s.submit_case(&body)).await {
        Ok(view) => ok_json(StatusCode::CREATED, &view),
        Err(e) => e.into_response(),
    }
}

async fn list(State(svc): State<Shared>) -> Response {
    json_body(&ListView { format: API_FORMAT, sessions: svc.list_sessions() })
}

async fn show(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    match svc.get_session(&id) {
        Ok(view) => json_body(&view),
        Err(e) => e.into_response(),
    }
}

async fn recommendations(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Response {
    match svc.get_session(&id) {
        Ok(view) => json_body(&RecommendationsView {
            format: API_FORMAT,
            case_id: view.case_id.as_str(),
            verdict: view.verdict,
            recommendations: view.recommendations,
        }),
        Err(e) => e.into_response(),
    }
}

async fn evidence(State(svc): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let result = blocking(svc, move |s| {
        let req: EvidenceRequest = parse_json(&body)?;
        s.respond_rmi(&id, req.evidence_items)
    })
    .await;
    match result {
        Ok(view) => json_body(&view),
        Err(e) => e.into_response(),
    }
}

async fn close(State(svc): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let result = blocking(svc, move |s| {
        let req: CloseRequest = if body.iter().all(u8::is_ascii_whitespace) { CloseRequest::default() } else { parse_json(&body)? };
        s.close(&id, req.final_verdict)
    })
    .await;
    match result {
        Ok(view) => json_body(&view),
        Err(e) => e.into_response(),
    }
}

async fn kb_ingest(State(svc): State<Shared>, body: Bytes) -> Response {
    match blocking(svc, move |s| s.ingest_historical(&body)).await {
        Ok((id, count)) => ok_json(StatusCode::CREATED, &IngestView { format: API_FORMAT, case_id: id.to_string(), count }),
        Err(e) => e.into_response(),
    }
}

async fn kb_stats(State(svc): State<Shared>) -> Response {
    json_body(&svc.kb_stats())
}

async fn metrics(State(svc): State<Shared>) -> Response {
    match blocking(svc, |s| Ok(s.metrics())).await {
        Ok(report) => ([(header::CONTENT_TYPE, "application/json")], report.to_text()).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Resolve a request path inside `root`, refusing anything that climbs out.
fn resolve_static(root: &Path, rel: &str) -> Option<PathBuf> {
    let mut out = root.to_path_buf();
    for c in Path::new(rel).components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(out)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

async fn console_file(svc: Shared, rel: String) -> Response {
    let rel = if rel.is_empty() { "index.html".to_string() } else { rel };
    let Some(root) = svc.console_dir.clone() else {
        return if rel == "index.html" {
            ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], CONSOLE_PLACEHOLDER).into_response()
        } else {
            StatusCode::NOT_FOUND.into_response()
        };
    };
    let Some(path) = resolve_static(&root, &rel) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match tokio::task::spawn_blocking(move || std::fs::read(&path).map(|b| (path, b))).await {
        Ok(Ok((path, bytes))) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        _ => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn console_index(State(svc): State<Shared>) -> Response {
    console_file(svc, String::new()).await
}

async fn console_asset(State(svc): State<Shared>, UrlPath(rel): UrlPath<String>) -> Response {
    console_file(svc, rel).await
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/cases", post(submit).get(list))
        .route("/cases/{id}", get(show))
        .route("/cases/{id}/evidence", post(evidence))
        .route("/cases/{id}/recommendations", get(recommendations))
        .route("/cases/{id}/close", post(close))
        .route("/kb/cases", post(kb_ingest))
        .route("/kb/stats", get(kb_stats))
        .route("/metrics", get(metrics))
        .route("/console", get(console_index))
        .route("/console/", get(console_index))
        .route("/console/{*path}", get(console_asset))
        .with_state(service)
}

/// Serve until Ctrl-C.
pub async fn serve(service: Arc<Service>, listen: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
