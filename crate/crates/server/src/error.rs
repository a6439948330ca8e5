use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use xa11y_core::project::ProjectError;
use xa11y_core::PipelineError;

use crate::store::StoreError;

/// Every error code the API can return. Clients may match on these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Malformed body, query or parameter value (400).
    InvalidRequest,
    /// A mutating call without `If-Match` (400).
    MissingRevision,
    /// Unknown project, segment, issue or annotation (404).
    NotFound,
    /// `If-Match` names an old revision (409).
    StaleRevision,
    /// The issue cannot move to the requested state (422).
    LifecycleViolation,
    /// The bundle could not be analyzed (422).
    AnalysisFailed,
    /// Storage or other server-side failure (500).
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::InvalidRequest | ErrorCode::MissingRevision => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::StaleRevision => StatusCode::CONFLICT,
            ErrorCode::LifecycleViolation | ErrorCode::AnalysisFailed => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), detail: None }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        let message = e.to_string();
        match e {
            ProjectError::UnknownSegment(id) => ApiError::not_found(message).with_detail(json!({ "segment_id": id })),
            ProjectError::UnknownIssue(id) => ApiError::not_found(message).with_detail(json!({ "issue_id": id })),
            ProjectError::UnknownAnnotation(id) => {
                ApiError::not_found(message).with_detail(json!({ "entry_id": id }))
            }
            ProjectError::EmptyText
            | ProjectError::KindMismatch { .. }
            | ProjectError::AnchorOutsideSegment { .. }
            | ProjectError::TauOutOfRange(_) => ApiError::invalid(message),
            ProjectError::AlreadyAddressed(id) => ApiError::new(ErrorCode::LifecycleViolation, message)
                .with_detail(json!({ "issue_id": id, "from": "addressed", "to": "dismissed" })),
            ProjectError::DuplicateIssue(id) => {
                ApiError::new(ErrorCode::LifecycleViolation, message).with_detail(json!({ "segment_id": id }))
            }
            ProjectError::LifecycleViolation { issue_id, from, to } => ApiError::new(ErrorCode::LifecycleViolation, message)
                .with_detail(json!({ "issue_id": issue_id, "from": from, "to": to })),
            ProjectError::FormatError(_) | ProjectError::VersionUnsupported { .. } | ProjectError::Io(_) => {
                ApiError::new(ErrorCode::Internal, message)
            }
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::UnknownProject(id) => ApiError::not_found(message).with_detail(json!({ "project_id": id })),
            StoreError::StaleRevision { expected, current } => ApiError::new(ErrorCode::StaleRevision, message)
                .with_detail(json!({ "expected": expected, "current": current })),
            StoreError::Project(inner) => inner.into(),
            StoreError::Io(_) | StoreError::Log(_) => ApiError::new(ErrorCode::Internal, message),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        ApiError::new(ErrorCode::AnalysisFailed, e.to_string()).with_detail(json!({ "stage": e.stage }))
    }
}
