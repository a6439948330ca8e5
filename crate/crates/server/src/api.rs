//! HTTP routes. Every handler is a thin projection of [`Project`] state;
//! mutations go through [`Store::mutate`] and never touch scores.

use std::collections::HashMap;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::header::{CONTENT_TYPE, ETAG, IF_MATCH, LOCATION};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower::ServiceExt;
use tower_http::services::{ServeDir, ServeFile};
use xa11y_core::embedding::EmbeddingProviderConfig;
use xa11y_core::ingest::DecoderConfig;
use xa11y_core::postprocess::{FilterConfig, Issue, IssueStatus};
use xa11y_core::project::{
    schedule_json, AnnotationEntry, AnnotationKind, ExportKind, Mutation, MutationRecord, Project,
};
use xa11y_core::{analyze, AnalysisConfig};

use crate::error::{ApiError, ErrorCode};
use crate::store::Store;

pub const DEFAULT_MATCHES_K: usize = 5;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/status", get(get_status))
        .route("/projects/{id}/timeline", get(get_timeline))
        .route("/projects/{id}/segments/{sid}/matches", get(get_matches))
        .route("/projects/{id}/annotations", post(add_annotation))
        .route("/projects/{id}/annotations/{eid}", put(edit_annotation).delete(remove_annotation))
        .route("/projects/{id}/issues", post(add_manual_issue))
        .route("/projects/{id}/issues/{iid}/dismiss", post(dismiss_issue))
        .route("/projects/{id}/issues/{iid}/reopen", post(reopen_issue))
        .route("/projects/{id}/filter", put(put_filter))
        .route("/projects/{id}/export", get(get_export))
        .route("/projects/{id}/preview", get(get_preview))
        .route("/projects/{id}/mutations", get(get_mutations))
        .route("/projects/{id}/media/{*path}", get(get_media))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("ascii")
}

fn with_etag<T: Serialize>(revision: u64, status: StatusCode, body: &T) -> Response {
    let mut resp = (status, Json(body)).into_response();
    resp.headers_mut().insert(ETAG, etag(revision));
    resp
}

/// Reads the revision from `If-Match`; bare (`3`) and quoted (`"3"`, `W/"3"`)
/// forms are accepted.
fn expected_revision(headers: &HeaderMap) -> ApiResult<u64> {
    let raw = headers.get(IF_MATCH).ok_or_else(|| {
        ApiError::new(ErrorCode::MissingRevision, "mutations require an If-Match header with the project revision")
    })?;
    let text = raw.to_str().unwrap_or("").trim();
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    text.parse().map_err(|_| {
        ApiError::new(ErrorCode::MissingRevision, format!("If-Match must be a revision number, got `{text}`"))
    })
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::invalid(e.body_text()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub project_id: String,
    pub video_id: String,
    pub duration: f64,
    pub revision: u64,
}

async fn list_projects(State(state): State<AppState>) -> ApiResult<Json<Vec<ProjectSummary>>> {
    let mut out = Vec::new();
    for id in state.store.ids() {
        let p = state.store.get(&id).await?;
        out.push(ProjectSummary {
            project_id: p.project_id.clone(),
            video_id: p.video_id.clone(),
            duration: p.duration,
            revision: p.revision,
        });
    }
    Ok(Json(out))
}

/// Body of `POST /projects`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisRequest {
    pub bundle_path: String,
    #[serde(default)]
    pub provider: Option<EmbeddingProviderConfig>,
    #[serde(default)]
    pub filters: Option<FilterConfig>,
    /// Overrides `provider.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl AnalysisRequest {
    pub fn config(&self) -> AnalysisConfig {
        let mut cfg = AnalysisConfig::default();
        if let Some(p) = &self.provider {
            cfg.provider = p.clone();
        }
        if let Some(seed) = self.seed {
            cfg.provider.seed = seed;
        }
        if let Some(f) = self.filters {
            cfg.filters = f;
        }
        cfg.load.decoder = DecoderConfig::from_env();
        cfg
    }
}

async fn create_project(
    State(state): State<AppState>,
    payload: Result<Json<AnalysisRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    if !FsPath::new(&req.bundle_path).is_dir() {
        return Err(ApiError::invalid(format!("bundle `{}` is not a directory", req.bundle_path))
            .with_detail(json!({ "bundle_path": req.bundle_path })));
    }
    let cfg = req.config();
    let path = req.bundle_path.clone();
    let project = tokio::task::spawn_blocking(move || analyze(FsPath::new(&path), &cfg))
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))??;
    let (project, created) = state.store.insert(project).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    let mut resp = with_etag(project.revision, status, &*project);
    let location = format!("/projects/{}", project.project_id);
    resp.headers_mut().insert(LOCATION, HeaderValue::from_str(&location).expect("ids are ascii"));
    Ok(resp)
}

async fn get_project(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = state.store.get(&id).await?;
    Ok(with_etag(p.revision, StatusCode::OK, &*p))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectStatus {
    pub project_id: String,
    /// Analysis runs inside `POST /projects`, so a known project is always `ready`.
    pub state: String,
    pub revision: u64,
    pub open_issues: usize,
    pub annotations: usize,
    pub warnings: Vec<String>,
}

async fn get_status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ProjectStatus>> {
    let p = state.store.get(&id).await?;
    Ok(Json(ProjectStatus {
        project_id: p.project_id.clone(),
        state: "ready".into(),
        revision: p.revision,
        open_issues: p.issues.iter().filter(|i| i.status == IssueStatus::Open).count(),
        annotations: p.annotations.len(),
        warnings: p.provenance.warnings.clone(),
    }))
}

async fn get_timeline(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = state.store.get(&id).await?;
    Ok(with_etag(p.revision, StatusCode::OK, &p.timeline()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchesResponse {
    pub segment_id: String,
    pub k: usize,
    pub matches: Vec<xa11y_core::grounding::Contribution>,
}

async fn get_matches(
    State(state): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Json<MatchesResponse>> {
    let k = match query.get("k") {
        None => DEFAULT_MATCHES_K,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|k| *k >= 1)
            .ok_or_else(|| ApiError::invalid(format!("k must be a positive integer, got `{raw}`")))?,
    };
    let p = state.store.get(&id).await?;
    let matches = p.top_matches(&sid, k).map_err(|e| ApiError::not_found(e.to_string()).with_detail(json!({ "segment_id": sid })))?;
    Ok(Json(MatchesResponse { segment_id: sid, k, matches }))
}

/// Response to every mutating call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MutationResponse {
    pub revision: u64,
    pub changed: bool,
    pub mutation: MutationRecord,
    /// Entry created by an annotation save.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_id: Option<String>,
    pub issues: Vec<Issue>,
    pub annotations: Vec<AnnotationEntry>,
}

async fn mutate(state: &AppState, id: &str, headers: &HeaderMap, mutation: Mutation) -> ApiResult<Response> {
    let expected = expected_revision(headers)?;
    let creates_entry = matches!(mutation, Mutation::AddAnnotation { .. });
    let applied = state.store.mutate(id, expected, mutation).await?;
    let p = &applied.project;
    let entry_id = (creates_entry && applied.changed).then(|| format!("ann-{}", p.revision));
    let resp = MutationResponse {
        revision: p.revision,
        changed: applied.changed,
        mutation: applied.record,
        entry_id,
        issues: p.issues.clone(),
        annotations: p.annotations.clone(),
    };
    Ok(with_etag(p.revision, StatusCode::OK, &resp))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRequest {
    pub kind: AnnotationKind,
    pub segment_id: String,
    pub text: String,
    #[serde(default)]
    pub anchor_time: Option<f64>,
}

async fn add_annotation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<AnnotationRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let m = Mutation::AddAnnotation { kind: req.kind, segment_id: req.segment_id, text: req.text, anchor_time: req.anchor_time };
    mutate(&state, &id, &headers, m).await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    pub text: String,
}

async fn edit_annotation(
    State(state): State<AppState>,
    Path((id, eid)): Path<(String, String)>,
    headers: HeaderMap,
    payload: Result<Json<EditRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    mutate(&state, &id, &headers, Mutation::EditAnnotation { entry_id: eid, text: req.text }).await
}

async fn remove_annotation(
    State(state): State<AppState>,
    Path((id, eid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    mutate(&state, &id, &headers, Mutation::RemoveAnnotation { entry_id: eid }).await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualIssueRequest {
    pub segment_id: String,
}

async fn add_manual_issue(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<ManualIssueRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    mutate(&state, &id, &headers, Mutation::AddManualIssue { segment_id: req.segment_id }).await
}

async fn dismiss_issue(
    State(state): State<AppState>,
    Path((id, iid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    mutate(&state, &id, &headers, Mutation::DismissIssue { issue_id: iid }).await
}

async fn reopen_issue(
    State(state): State<AppState>,
    Path((id, iid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    mutate(&state, &id, &headers, Mutation::ReopenIssue { issue_id: iid }).await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRequest {
    pub tau: f64,
}

async fn put_filter(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<FilterRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    mutate(&state, &id, &headers, Mutation::Refilter { tau: req.tau }).await
}

pub fn parse_export_kind(raw: &str) -> Option<ExportKind> {
    match raw {
        "captions" => Some(ExportKind::Captions),
        "descriptions" => Some(ExportKind::Descriptions),
        "schedule" => Some(ExportKind::Schedule),
        _ => None,
    }
}

/// Export body and its content type.
pub fn export(project: &Project, kind: ExportKind) -> (String, &'static str) {
    match kind {
        ExportKind::Captions => (project.export_webvtt(AnnotationKind::Caption), "text/vtt; charset=utf-8"),
        ExportKind::Descriptions => {
            (project.export_webvtt(AnnotationKind::AudioDescription), "text/vtt; charset=utf-8")
        }
        ExportKind::Schedule => (schedule_json(&project.preview_schedule()), "application/json"),
    }
}

async fn get_export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let raw = query.get("kind").map(String::as_str).unwrap_or("");
    let kind = parse_export_kind(raw).ok_or_else(|| {
        ApiError::invalid(format!("kind must be captions, descriptions or schedule, got `{raw}`"))
    })?;
    let p = state.store.get(&id).await?;
    let (text, content_type) = export(&p, kind);
    let mut resp = text.into_response();
    resp.headers_mut().insert(CONTENT_TYPE, HeaderValue::from_static(content_type));
    resp.headers_mut().insert(ETAG, etag(p.revision));
    Ok(resp)
}

async fn get_preview(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = state.store.get(&id).await?;
    Ok(with_etag(p.revision, StatusCode::OK, &p.preview_schedule()))
}

async fn get_mutations(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<MutationRecord>>> {
    Ok(Json(state.store.mutations(&id)?))
}

/// Serves a file from the project's bundle directory.
async fn get_media(
    State(state): State<AppState>,
    Path((id, rel)): Path<(String, String)>,
    req: Request<Body>,
) -> ApiResult<Response> {
    let p = state.store.get(&id).await?;
    let rel = PathBuf::from(&rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(ApiError::invalid("media path must stay inside the bundle"));
    }
    let path = PathBuf::from(&p.provenance.bundle_path).join(&rel);
    if !path.is_file() {
        return Err(ApiError::not_found(format!("no media file `{}`", rel.display())));
    }
    let resp = ServeFile::new(path).oneshot(req).await.map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
    Ok(resp.map(Body::new))
}
