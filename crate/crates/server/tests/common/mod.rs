#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde::Serialize;
use serde_json::Value;
use tower::ServiceExt;
use xa11y_server::{router, AppState, Store};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn schema_root() -> Value {
    let text = std::fs::read_to_string(repo_root().join("docs/schemas/xa11y.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub struct Schemas {
    root: Value,
}

impl Schemas {
    pub fn load() -> Self {
        Self { root: schema_root() }
    }

    /// Validation errors of `value` against `$defs/<name>`.
    pub fn errors(&self, name: &str, value: &Value) -> Vec<String> {
        assert!(self.root["$defs"].get(name).is_some(), "no schema named {name}");
        let mut schema = self.root.clone();
        schema["$ref"] = Value::String(format!("#/$defs/{name}"));
        let validator = jsonschema::validator_for(&schema).expect("schema compiles");
        validator.iter_errors(value).map(|e| format!("{name}: {e} at {}", e.instance_path())).collect()
    }
}

/// Deterministic clock: 1000, 2000, ...
pub fn counter_clock() -> xa11y_server::store::Clock {
    let n = Arc::new(AtomicU64::new(0));
    Arc::new(move || (n.fetch_add(1, Ordering::SeqCst) + 1) * 1000)
}

pub fn app(dir: &Path) -> Router {
    let store = Store::open(dir, counter_clock()).unwrap();
    router(AppState { store: Arc::new(store) }, None)
}

/// One recorded request/response pair.
#[derive(Debug, Clone, Serialize)]
pub struct Exchange {
    pub name: String,
    pub method: String,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub if_match: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request_schema: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request: Option<Value>,
    pub status: u16,
    pub response_schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub etag: Option<String>,
    pub content_type: String,
    /// JSON bodies as-is; text bodies as a JSON string.
    pub response: Value,
}

pub struct Client {
    pub app: Router,
    pub log: Vec<Exchange>,
}

pub struct Call<'a> {
    pub name: &'a str,
    pub method: Method,
    pub path: String,
    pub if_match: Option<u64>,
    pub body: Option<(&'a str, Value)>,
    pub response_schema: &'a str,
}

impl<'a> Call<'a> {
    pub fn get(name: &'a str, path: impl Into<String>, response_schema: &'a str) -> Self {
        Self { name, method: Method::GET, path: path.into(), if_match: None, body: None, response_schema }
    }

    pub fn send(name: &'a str, method: Method, path: impl Into<String>, response_schema: &'a str) -> Self {
        Self { name, method, path: path.into(), if_match: None, body: None, response_schema }
    }

    pub fn if_match(mut self, revision: u64) -> Self {
        self.if_match = Some(revision);
        self
    }

    pub fn json(mut self, schema: &'a str, body: Value) -> Self {
        self.body = Some((schema, body));
        self
    }
}

impl Client {
    pub fn new(app: Router) -> Self {
        Self { app, log: Vec::new() }
    }

    pub async fn call(&mut self, call: Call<'_>) -> (StatusCode, Value) {
        let mut builder = Request::builder().method(call.method.clone()).uri(&call.path);
        if let Some(rev) = call.if_match {
            builder = builder.header("if-match", format!("\"{rev}\""));
        }
        let req = match &call.body {
            Some((_, body)) => builder
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(body).unwrap()))
                .unwrap(),
            None => builder.body(Body::empty()).unwrap(),
        };
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let (etag, content_type) = {
            let header = |name: &str| resp.headers().get(name).map(|v| v.to_str().unwrap().to_string());
            (header("etag"), header("content-type").unwrap_or_default())
        };
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        let response = if content_type.starts_with("application/json") {
            serde_json::from_str(&text).unwrap()
        } else {
            Value::String(text)
        };
        self.log.push(Exchange {
            name: call.name.to_string(),
            method: call.method.to_string(),
            path: call.path.clone(),
            if_match: call.if_match.map(|r| format!("\"{r}\"")),
            request_schema: call.body.as_ref().map(|(s, _)| s.to_string()),
            request: call.body.map(|(_, b)| b),
            status: status.as_u16(),
            response_schema: call.response_schema.to_string(),
            etag,
            content_type,
            response: response.clone(),
        });
        (status, response)
    }
}

/// Schema violations across a recorded exchange list.
pub fn exchange_errors(schemas: &Schemas, exchanges: &[Exchange]) -> Vec<String> {
    let mut errors = Vec::new();
    for ex in exchanges {
        if let (Some(schema), Some(body)) = (&ex.request_schema, &ex.request) {
            errors.extend(schemas.errors(schema, body).into_iter().map(|e| format!("{} request: {e}", ex.name)));
        }
        errors.extend(schemas.errors(&ex.response_schema, &ex.response).into_iter().map(|e| format!("{} response: {e}", ex.name)));
    }
    errors
}

/// Replaces a machine-specific path so recordings are stable.
pub fn scrub(value: &mut Value, needle: &str, replacement: &str) {
    match value {
        Value::String(s) if s.contains(needle) => *s = s.replace(needle, replacement),
        Value::Array(items) => items.iter_mut().for_each(|v| scrub(v, needle, replacement)),
        Value::Object(map) => map.values_mut().for_each(|v| scrub(v, needle, replacement)),
        _ => {}
    }
}

fn rev(v: &Value) -> u64 {
    v["revision"].as_u64().expect("revision in body")
}

fn open_ids(issues: &Value) -> Vec<String> {
    issues
        .as_array()
        .unwrap()
        .iter()
        .filter(|i| i["status"] == "open")
        .map(|i| i["issue_id"].as_str().unwrap().to_string())
        .collect()
}

/// Drives every endpoint once against the demo bundle at `bundle`, asserting
/// status codes and the lifecycle along the way. Returns the project id.
pub async fn run_scenario(c: &mut Client, bundle: &str) -> String {
    use serde_json::json;
    let req = json!({ "bundle_path": bundle });
    let (s, p) = c.call(Call::send("create", Method::POST, "/projects", "Project").json("AnalysisRequest", req.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = p["project_id"].as_str().unwrap().to_string();
    let base = format!("/projects/{id}");
    let (s, again) = c.call(Call::send("create_existing", Method::POST, "/projects", "Project").json("AnalysisRequest", req)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(again, p);

    let (s, list) = c.call(Call::get("list", "/projects", "ProjectList")).await;
    assert_eq!((s, list[0]["project_id"].as_str()), (StatusCode::OK, Some(id.as_str())));
    let (s, got) = c.call(Call::get("get", base.clone(), "Project")).await;
    assert_eq!((s, &got), (StatusCode::OK, &p));
    assert_eq!(c.log.last().unwrap().etag.as_deref(), Some("\"0\""));
    let (s, status) = c.call(Call::get("status", format!("{base}/status"), "ProjectStatus")).await;
    assert_eq!((s, status["open_issues"].as_u64()), (StatusCode::OK, Some(2)));
    let (s, timeline) = c.call(Call::get("timeline", format!("{base}/timeline"), "Timeline")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(timeline["visual"].as_array().unwrap().len(), 5);

    let (s, m) = c.call(Call::get("matches", format!("{base}/segments/v2/matches?k=3"), "MatchesResponse")).await;
    assert_eq!(s, StatusCode::OK);
    let scores: Vec<f64> = m["matches"].as_array().unwrap().iter().map(|x| x["weighted_score"].as_f64().unwrap()).collect();
    assert!(scores.len() <= 3 && scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    let (s, _) = c.call(Call::get("matches_bad_k", format!("{base}/segments/v2/matches?k=zero"), "ApiError")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = c.call(Call::get("matches_unknown_segment", format!("{base}/segments/v9/matches"), "ApiError")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // describe the undescribed shot
    let ann = json!({ "kind": "audio_description", "segment_id": "v2", "text": "Butter browns in a pan." });
    let (s, r) = c
        .call(Call::send("annotate", Method::POST, format!("{base}/annotations"), "MutationResponse").if_match(0).json("AnnotationRequest", ann))
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((rev(&r), r["entry_id"].as_str()), (1, Some("ann-1")));
    let (s, r) = c
        .call(
            Call::send("edit", Method::PUT, format!("{base}/annotations/ann-1"), "MutationResponse")
                .if_match(1)
                .json("EditRequest", json!({ "text": "Butter foams and browns in a pan." })),
        )
        .await;
    assert_eq!((s, rev(&r)), (StatusCode::OK, 2));
    let (s, e) = c.call(Call::send("dismiss_addressed", Method::POST, format!("{base}/issues/auto-v2/dismiss"), "ApiError").if_match(2)).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("lifecycle_violation")));

    // dismiss, then retry with the old token
    let (s, r) = c.call(Call::send("dismiss", Method::POST, format!("{base}/issues/auto-a5/dismiss"), "MutationResponse").if_match(2)).await;
    assert_eq!((s, rev(&r)), (StatusCode::OK, 3));
    let (s, e) = c.call(Call::send("dismiss_stale", Method::POST, format!("{base}/issues/auto-a5/dismiss"), "ApiError").if_match(2)).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::CONFLICT, Some("stale_revision")));
    assert_eq!(e["detail"]["current"], 3);
    let (s, e) = c.call(Call::send("dismiss_no_revision", Method::POST, format!("{base}/issues/auto-a5/dismiss"), "ApiError")).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("missing_revision")));
    let (s, r) = c.call(Call::send("dismiss_again", Method::POST, format!("{base}/issues/auto-a5/dismiss"), "MutationResponse").if_match(3)).await;
    assert_eq!((s, r["changed"].as_bool(), rev(&r)), (StatusCode::OK, Some(false), 3));
    let (s, _) = c.call(Call::send("dismiss_unknown", Method::POST, format!("{base}/issues/auto-v0/dismiss"), "ApiError").if_match(3)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, r) = c.call(Call::send("reopen", Method::POST, format!("{base}/issues/auto-a5/reopen"), "MutationResponse").if_match(3)).await;
    assert_eq!((s, rev(&r)), (StatusCode::OK, 4));

    let (s, r) = c
        .call(
            Call::send("manual_issue", Method::POST, format!("{base}/issues"), "MutationResponse")
                .if_match(4)
                .json("ManualIssueRequest", json!({ "segment_id": "v4" })),
        )
        .await;
    assert_eq!((s, rev(&r)), (StatusCode::OK, 5));
    assert!(open_ids(&r["issues"]).contains(&"manual-v4".to_string()));
    let (s, _) = c
        .call(
            Call::send("manual_issue_duplicate", Method::POST, format!("{base}/issues"), "ApiError")
                .if_match(5)
                .json("ManualIssueRequest", json!({ "segment_id": "v2" })),
        )
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let cap = json!({ "kind": "caption", "segment_id": "a5", "text": "[oven timer beeping]" });
    let (s, r) = c
        .call(Call::send("caption", Method::POST, format!("{base}/annotations"), "MutationResponse").if_match(5).json("AnnotationRequest", cap))
        .await;
    assert_eq!((s, r["entry_id"].as_str()), (StatusCode::OK, Some("ann-6")));
    let bad = json!({ "kind": "caption", "segment_id": "v2", "text": "wrong track" });
    let (s, _) = c
        .call(Call::send("caption_wrong_track", Method::POST, format!("{base}/annotations"), "ApiError").if_match(6).json("AnnotationRequest", bad))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = c
        .call(Call::send("annotation_malformed", Method::POST, format!("{base}/annotations"), "ApiError").if_match(6).json("EditRequest", json!({ "text": "no kind" })))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    // a mutation a later DELETE undoes
    let extra = json!({ "kind": "audio_description", "segment_id": "v3", "text": "The oven door opens.", "anchor_time": 40.0 });
    let (s, r) = c
        .call(Call::send("annotate_anchored", Method::POST, format!("{base}/annotations"), "MutationResponse").if_match(6).json("AnnotationRequest", extra))
        .await;
    assert_eq!((s, r["entry_id"].as_str()), (StatusCode::OK, Some("ann-7")));
    let (s, r) = c.call(Call::send("remove_annotation", Method::DELETE, format!("{base}/annotations/ann-7"), "MutationResponse").if_match(7)).await;
    assert_eq!((s, rev(&r)), (StatusCode::OK, 8));

    let (s, r) = c
        .call(Call::send("refilter", Method::PUT, format!("{base}/filter"), "MutationResponse").if_match(8).json("FilterRequest", json!({ "tau": 0.75 })))
        .await;
    assert_eq!((s, rev(&r)), (StatusCode::OK, 9));
    let (s, _) = c
        .call(Call::send("refilter_out_of_range", Method::PUT, format!("{base}/filter"), "ApiError").if_match(9).json("FilterRequest", json!({ "tau": 1.5 })))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (_, t) = c.call(Call::get("timeline_after", format!("{base}/timeline"), "Timeline")).await;
    assert_eq!((rev(&t), t["tau"].as_f64()), (9, Some(0.75)));

    for kind in ["captions", "descriptions", "schedule"] {
        let schema = if kind == "schedule" { "PreviewSchedule" } else { "WebVtt" };
        let (s, _) = c.call(Call::get("export", format!("{base}/export?kind={kind}"), schema)).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, _) = c.call(Call::get("export_unknown", format!("{base}/export?kind=srt"), "ApiError")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, preview) = c.call(Call::get("preview", format!("{base}/preview"), "PreviewSchedule")).await;
    assert_eq!((s, preview[0]["action"].as_str()), (StatusCode::OK, Some("pause_video")));
    let (s, log) = c.call(Call::get("mutations", format!("{base}/mutations"), "MutationLog")).await;
    assert_eq!((s, log.as_array().unwrap().len()), (StatusCode::OK, 9));
    let (s, media) = c.call(Call::get("media", format!("{base}/media/transcript.tsv"), "Text")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(media.as_str().unwrap().starts_with("whisk\t"));
    let (s, _) = c.call(Call::get("media_escape", format!("{base}/media/..%2Fsecret"), "ApiError")).await;
    assert!(s == StatusCode::BAD_REQUEST || s == StatusCode::NOT_FOUND, "{s}");

    let (s, _) = c.call(Call::get("unknown_project", "/projects/nope-000000000000", "ApiError")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, e) = c
        .call(Call::send("create_missing_bundle", Method::POST, "/projects", "ApiError").json("AnalysisRequest", json!({ "bundle_path": "/nonexistent/bundle" })))
        .await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_request")));
    id
}
