//! Authoring state: issues, descriptions and captions for one analyzed video.
//!
//! All author actions go through [`Project::apply`] with a [`MutationRecord`]
//! so that a recorded log replayed over a fresh analysis reproduces the same
//! project. Every effective mutation bumps `revision` by one; no-ops leave it.

pub mod color;
pub mod webvtt;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use color::{score_to_color, ScoreOutOfRange};

use crate::embedding::ProviderKind;
use crate::grounding::{top_matches, Contribution, GroundingError, MatrixKind, ScoredSegment, TemporalWeightConfig};
use crate::postprocess::{self, FilterConfig, Issue, IssueOrigin, IssueStatus, SegmentMetrics};
use crate::segmentation::{AudioSegment, VisualSegment};
use crate::Modality;

pub const PROJECT_FORMAT_VERSION: u32 = 1;
pub const PROJECT_FILE_SUFFIX: &str = ".xa11y.json";
/// Length given to description cues in the descriptions track.
pub const DESCRIPTION_CUE_SECS: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("unknown issue `{0}`")]
    UnknownIssue(String),
    #[error("unknown annotation `{0}`")]
    UnknownAnnotation(String),
    #[error("annotation text is empty")]
    EmptyText,
    #[error("issue `{0}` is addressed; un-save its annotations first")]
    AlreadyAddressed(String),
    #[error("segment `{0}` already has an open or addressed issue")]
    DuplicateIssue(String),
    #[error("cannot move issue `{issue_id}` from {from:?} to {to:?}")]
    LifecycleViolation { issue_id: String, from: IssueStatus, to: IssueStatus },
    #[error("{kind:?} annotations belong on {expected} segments")]
    KindMismatch { kind: AnnotationKind, expected: Modality },
    #[error("anchor {anchor} outside segment `{segment_id}`")]
    AnchorOutsideSegment { segment_id: String, anchor: f64 },
    #[error("tau must be in [0, 1], got {0}")]
    TauOutOfRange(f64),
    #[error("project file format error: {0}")]
    FormatError(String),
    #[error("project format version {found} is newer than supported {supported}")]
    VersionUnsupported { found: u64, supported: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    AudioDescription,
    Caption,
}

impl AnnotationKind {
    pub fn modality(self) -> Modality {
        match self {
            AnnotationKind::AudioDescription => Modality::Visual,
            AnnotationKind::Caption => Modality::Audio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLogEntry {
    pub at_ms: u64,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub entry_id: String,
    pub kind: AnnotationKind,
    pub segment_id: String,
    pub anchor_time: f64,
    pub text: String,
    pub author_action_log: Vec<ActionLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub kind: MatrixKind,
    pub rows: usize,
    pub cols: usize,
    pub checksum: String,
}

/// Everything needed to recompute the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub bundle_path: String,
    pub provider: ProviderKind,
    pub dim: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings_file: Option<String>,
    /// `embeddings` or `matrix_sidecar`.
    pub matrix_source: String,
    pub content_threshold: f64,
    pub temporal: TemporalWeightConfig,
    pub speech_constant: f64,
    pub stopwords_version: u32,
    pub filters: FilterConfig,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub format_version: u32,
    pub project_id: String,
    pub video_id: String,
    pub duration: f64,
    pub visual_segments: Vec<VisualSegment>,
    pub audio_segments: Vec<AudioSegment>,
    pub matrices: Vec<MatrixSummary>,
    pub scored: Vec<ScoredSegment>,
    pub metrics: BTreeMap<String, SegmentMetrics>,
    pub issues: Vec<Issue>,
    pub annotations: Vec<AnnotationEntry>,
    pub filter_config: FilterConfig,
    pub provenance: Provenance,
    pub revision: u64,
}

/// One author action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    AddAnnotation {
        kind: AnnotationKind,
        segment_id: String,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor_time: Option<f64>,
    },
    EditAnnotation { entry_id: String, text: String },
    /// Un-save: drops the annotation; the issue reopens once none remain.
    RemoveAnnotation { entry_id: String },
    DismissIssue { issue_id: String },
    ReopenIssue { issue_id: String },
    AddManualIssue { segment_id: String },
    Refilter { tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub at_ms: u64,
    #[serde(flatten)]
    pub mutation: Mutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineBar {
    pub segment_id: String,
    pub start: f64,
    pub end: f64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<IssueStatus>,
    pub color: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<crate::segmentation::AudioKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub revision: u64,
    pub tau: f64,
    pub visual: Vec<TimelineBar>,
    pub audio: Vec<TimelineBar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum PreviewAction {
    PauseVideo,
    Speak { text: String },
    ResumeVideo,
    ShowCaption { text: String, until: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewEvent {
    pub at: f64,
    #[serde(flatten)]
    pub action: PreviewAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportKind {
    Captions,
    Descriptions,
    Schedule,
}

impl Project {
    fn span_of(&self, segment_id: &str) -> Option<(Modality, f64, f64)> {
        self.visual_segments
            .iter()
            .find(|s| s.id == segment_id)
            .map(|s| (Modality::Visual, s.start, s.end))
            .or_else(|| {
                self.audio_segments
                    .iter()
                    .find(|s| s.id == segment_id)
                    .map(|s| (Modality::Audio, s.start, s.end))
            })
    }

    pub fn score_of(&self, segment_id: &str) -> Option<f64> {
        self.scored.iter().find(|s| s.segment_id == segment_id).map(|s| s.score)
    }

    pub fn issue(&self, issue_id: &str) -> Option<&Issue> {
        self.issues.iter().find(|i| i.issue_id == issue_id)
    }

    fn issue_mut(&mut self, issue_id: &str) -> Result<&mut Issue, ProjectError> {
        self.issues
            .iter_mut()
            .find(|i| i.issue_id == issue_id)
            .ok_or_else(|| ProjectError::UnknownIssue(issue_id.to_string()))
    }

    /// The status shown for a segment when it has several issues.
    pub fn segment_status(&self, segment_id: &str) -> Option<IssueStatus> {
        let statuses: Vec<IssueStatus> = self
            .issues
            .iter()
            .filter(|i| i.segment_id == segment_id)
            .map(|i| i.status)
            .collect();
        [
            IssueStatus::Addressed,
            IssueStatus::Open,
            IssueStatus::SuppressedPresenter,
            IssueStatus::SuppressedSilence,
            IssueStatus::Dismissed,
        ]
        .into_iter()
        .find(|s| statuses.contains(s))
    }

    /// Applies one author action; returns whether anything changed.
    pub fn apply(&mut self, record: &MutationRecord) -> Result<bool, ProjectError> {
        let at = record.at_ms;
        let changed = match &record.mutation {
            Mutation::AddAnnotation { kind, segment_id, text, anchor_time } => {
                self.add_annotation(*kind, segment_id, text, *anchor_time, at)?
            }
            Mutation::EditAnnotation { entry_id, text } => self.edit_annotation(entry_id, text, at)?,
            Mutation::RemoveAnnotation { entry_id } => self.remove_annotation(entry_id)?,
            Mutation::DismissIssue { issue_id } => self.dismiss_issue(issue_id)?,
            Mutation::ReopenIssue { issue_id } => self.reopen_issue(issue_id)?,
            Mutation::AddManualIssue { segment_id } => self.add_manual_issue(segment_id)?,
            Mutation::Refilter { tau } => self.refilter(*tau)?,
        };
        if changed {
            self.revision += 1;
        }
        Ok(changed)
    }

    fn add_annotation(
        &mut self,
        kind: AnnotationKind,
        segment_id: &str,
        text: &str,
        anchor_time: Option<f64>,
        at_ms: u64,
    ) -> Result<bool, ProjectError> {
        let (modality, start, end) =
            self.span_of(segment_id).ok_or_else(|| ProjectError::UnknownSegment(segment_id.to_string()))?;
        let text = text.trim();
        if text.is_empty() {
            return Err(ProjectError::EmptyText);
        }
        if kind.modality() != modality {
            return Err(ProjectError::KindMismatch { kind, expected: kind.modality() });
        }
        let anchor = anchor_time.unwrap_or(start);
        if !(anchor >= start && anchor <= end) {
            return Err(ProjectError::AnchorOutsideSegment { segment_id: segment_id.to_string(), anchor });
        }

        let linked = self
            .issues
            .iter()
            .position(|i| i.segment_id == segment_id && i.status != IssueStatus::Dismissed);
        match linked {
            Some(k) => self.issues[k].status = IssueStatus::Addressed,
            None => {
                if let Some(dismissed) = self.issues.iter().find(|i| i.segment_id == segment_id) {
                    return Err(ProjectError::LifecycleViolation {
                        issue_id: dismissed.issue_id.clone(),
                        from: IssueStatus::Dismissed,
                        to: IssueStatus::Addressed,
                    });
                }
                self.issues.push(Issue {
                    issue_id: manual_issue_id(segment_id),
                    segment_id: segment_id.to_string(),
                    modality,
                    score: self.score_of(segment_id).unwrap_or(0.0),
                    status: IssueStatus::Addressed,
                    created_from: IssueOrigin::Manual,
                });
                postprocess::sort_issues(&mut self.issues, &self.scored);
            }
        }
        self.annotations.push(AnnotationEntry {
            entry_id: format!("ann-{}", self.revision + 1),
            kind,
            segment_id: segment_id.to_string(),
            anchor_time: anchor,
            text: text.to_string(),
            author_action_log: vec![ActionLogEntry { at_ms, action: "save".into() }],
        });
        Ok(true)
    }

    fn edit_annotation(&mut self, entry_id: &str, text: &str, at_ms: u64) -> Result<bool, ProjectError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ProjectError::EmptyText);
        }
        let entry = self
            .annotations
            .iter_mut()
            .find(|a| a.entry_id == entry_id)
            .ok_or_else(|| ProjectError::UnknownAnnotation(entry_id.to_string()))?;
        if entry.text == text {
            return Ok(false);
        }
        entry.text = text.to_string();
        entry.author_action_log.push(ActionLogEntry { at_ms, action: "edit".into() });
        Ok(true)
    }

    fn remove_annotation(&mut self, entry_id: &str) -> Result<bool, ProjectError> {
        let k = self
            .annotations
            .iter()
            .position(|a| a.entry_id == entry_id)
            .ok_or_else(|| ProjectError::UnknownAnnotation(entry_id.to_string()))?;
        let removed = self.annotations.remove(k);
        if !self.annotations.iter().any(|a| a.segment_id == removed.segment_id) {
            for issue in self.issues.iter_mut().filter(|i| i.segment_id == removed.segment_id) {
                if issue.status == IssueStatus::Addressed {
                    issue.status = IssueStatus::Open;
                }
            }
        }
        Ok(true)
    }

    fn dismiss_issue(&mut self, issue_id: &str) -> Result<bool, ProjectError> {
        let issue = self.issue_mut(issue_id)?;
        match issue.status {
            IssueStatus::Dismissed => Ok(false),
            IssueStatus::Addressed => Err(ProjectError::AlreadyAddressed(issue_id.to_string())),
            _ => {
                issue.status = IssueStatus::Dismissed;
                Ok(true)
            }
        }
    }

    fn reopen_issue(&mut self, issue_id: &str) -> Result<bool, ProjectError> {
        let issue = self.issue_mut(issue_id)?;
        match issue.status {
            IssueStatus::Open => Ok(false),
            IssueStatus::Dismissed => {
                issue.status = IssueStatus::Open;
                Ok(true)
            }
            from => Err(ProjectError::LifecycleViolation { issue_id: issue_id.to_string(), from, to: IssueStatus::Open }),
        }
    }

    fn add_manual_issue(&mut self, segment_id: &str) -> Result<bool, ProjectError> {
        let (modality, _, _) =
            self.span_of(segment_id).ok_or_else(|| ProjectError::UnknownSegment(segment_id.to_string()))?;
        if self
            .issues
            .iter()
            .any(|i| i.segment_id == segment_id && matches!(i.status, IssueStatus::Open | IssueStatus::Addressed))
        {
            return Err(ProjectError::DuplicateIssue(segment_id.to_string()));
        }
        let id = manual_issue_id(segment_id);
        if let Some(existing) = self.issues.iter_mut().find(|i| i.issue_id == id) {
            existing.status = IssueStatus::Open;
        } else {
            self.issues.push(Issue {
                issue_id: id,
                segment_id: segment_id.to_string(),
                modality,
                score: self.score_of(segment_id).unwrap_or(0.0),
                status: IssueStatus::Open,
                created_from: IssueOrigin::Manual,
            });
            postprocess::sort_issues(&mut self.issues, &self.scored);
        }
        Ok(true)
    }

    fn refilter(&mut self, tau: f64) -> Result<bool, ProjectError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(ProjectError::TauOutOfRange(tau));
        }
        if tau == self.filter_config.tau {
            return Ok(false);
        }
        self.issues = postprocess::refilter(&self.issues, &self.scored, &self.metrics, &self.filter_config, tau)
            .map_err(|_| ProjectError::TauOutOfRange(tau))?;
        self.filter_config.tau = tau;
        Ok(true)
    }

    pub fn top_matches(&self, segment_id: &str, k: usize) -> Result<Vec<Contribution>, GroundingError> {
        top_matches(&self.scored, segment_id, k)
    }

    pub fn timeline(&self) -> Timeline {
        let bar = |id: &str, start: f64, end: f64, kind| {
            let score = self.score_of(id).unwrap_or(1.0);
            let status = self.segment_status(id);
            TimelineBar {
                segment_id: id.to_string(),
                start,
                end,
                score,
                status,
                color: color::hex(score_to_color(score.clamp(0.0, 1.0), status).expect("clamped")),
                kind,
            }
        };
        Timeline {
            revision: self.revision,
            tau: self.filter_config.tau,
            visual: self.visual_segments.iter().map(|s| bar(&s.id, s.start, s.end, None)).collect(),
            audio: self.audio_segments.iter().map(|s| bar(&s.id, s.start, s.end, Some(s.kind))).collect(),
        }
    }

    /// Annotations of one kind that are not on dismissed segments, in
    /// (anchor, entry) order.
    fn exported(&self, kind: AnnotationKind) -> Vec<&AnnotationEntry> {
        let mut out: Vec<&AnnotationEntry> = self
            .annotations
            .iter()
            .filter(|a| a.kind == kind && self.segment_status(&a.segment_id) != Some(IssueStatus::Dismissed))
            .collect();
        out.sort_by(|a, b| a.anchor_time.total_cmp(&b.anchor_time));
        out
    }

    pub fn export_webvtt(&self, kind: AnnotationKind) -> String {
        match kind {
            AnnotationKind::Caption => {
                let mut cues: Vec<webvtt::Cue> = self
                    .exported(kind)
                    .into_iter()
                    .filter_map(|a| {
                        let (_, start, end) = self.span_of(&a.segment_id)?;
                        Some(webvtt::Cue { id: Some(a.entry_id.clone()), start, end, text: a.text.clone() })
                    })
                    .collect();
                cues.sort_by(|a, b| a.start.total_cmp(&b.start));
                webvtt::write_document(None, &cues)
            }
            AnnotationKind::AudioDescription => {
                let cues: Vec<webvtt::Cue> = self
                    .exported(kind)
                    .into_iter()
                    .map(|a| webvtt::Cue {
                        id: Some(a.entry_id.clone()),
                        start: a.anchor_time,
                        end: a.anchor_time + DESCRIPTION_CUE_SECS,
                        text: a.text.clone(),
                    })
                    .collect();
                webvtt::write_document(Some("descriptions"), &cues)
            }
        }
    }

    /// Playback script: every description anchor pauses the video, speaks the
    /// descriptions anchored there in entry order, then resumes; captions show
    /// over their segment span.
    pub fn preview_schedule(&self) -> Vec<PreviewEvent> {
        // (time, captions-first rank, events)
        let mut groups: Vec<(f64, u8, Vec<PreviewEvent>)> = Vec::new();
        for a in self.exported(AnnotationKind::Caption) {
            let Some((_, start, end)) = self.span_of(&a.segment_id) else { continue };
            groups.push((
                start,
                0,
                vec![PreviewEvent { at: start, action: PreviewAction::ShowCaption { text: a.text.clone(), until: end } }],
            ));
        }
        let mut descriptions = self.exported(AnnotationKind::AudioDescription).into_iter().peekable();
        while let Some(first) = descriptions.next() {
            let at = first.anchor_time;
            let mut events = vec![
                PreviewEvent { at, action: PreviewAction::PauseVideo },
                PreviewEvent { at, action: PreviewAction::Speak { text: first.text.clone() } },
            ];
            while let Some(next) = descriptions.next_if(|d| d.anchor_time == at) {
                events.push(PreviewEvent { at, action: PreviewAction::Speak { text: next.text.clone() } });
            }
            events.push(PreviewEvent { at, action: PreviewAction::ResumeVideo });
            groups.push((at, 1, events));
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        groups.into_iter().flat_map(|g| g.2).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("project serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ProjectError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ProjectError::FormatError(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ProjectError::FormatError("missing format_version".into()))?;
        if version > PROJECT_FORMAT_VERSION as u64 {
            return Err(ProjectError::VersionUnsupported { found: version, supported: PROJECT_FORMAT_VERSION });
        }
        serde_json::from_value(value).map_err(|e| ProjectError::FormatError(e.to_string()))
    }
}

pub fn manual_issue_id(segment_id: &str) -> String {
    format!("manual-{segment_id}")
}

/// Writes atomically: a temporary sibling file renamed over the target.
pub fn save_project(path: &Path, project: &Project) -> Result<(), ProjectError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, project.to_json())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_project(path: &Path) -> Result<Project, ProjectError> {
    Project::from_json(&std::fs::read_to_string(path)?)
}

/// Serializes a preview schedule for `schedule.json`.
pub fn schedule_json(events: &[PreviewEvent]) -> String {
    let mut s = serde_json::to_string_pretty(events).expect("schedule serializes");
    s.push('\n');
    s
}

