//! False-positive filters and issue surfacing.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::ScoredSegment;
use crate::ingest::{AudioTrack, FaceSidecar};
use crate::segmentation::{AudioKind, AudioSegment, Span, VisualSegment};
use crate::Modality;

pub const DEFAULT_TH_PRESENTER: f64 = 58_000.0;
/// The pixel threshold expressed as a fraction of a 1280x720 frame.
pub const DEFAULT_TH_PRESENTER_FRACTION: f64 = DEFAULT_TH_PRESENTER / (1280.0 * 720.0);
pub const DEFAULT_TH_SILENCE: f64 = 0.007;
pub const DEFAULT_TAU: f64 = 0.35;
pub const SILENCE_WINDOW_SECS: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum PostprocessError {
    #[error("tau must be in [0, 1], got {0}")]
    TauOutOfRange(f64),
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("segment `{0}` is speech; silence applies to non-speech and pause segments")]
    WrongKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresenterUnits {
    /// Face area in px² per second, compared with `th_presenter`.
    Pixels,
    /// Face area as a fraction of the frame per second, compared with
    /// `th_presenter_fraction`. Resolution independent.
    FrameFraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub th_presenter: f64,
    pub th_silence: f64,
    pub tau: f64,
    pub presenter_units: PresenterUnits,
    pub th_presenter_fraction: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            th_presenter: DEFAULT_TH_PRESENTER,
            th_silence: DEFAULT_TH_SILENCE,
            tau: DEFAULT_TAU,
            presenter_units: PresenterUnits::Pixels,
            th_presenter_fraction: DEFAULT_TH_PRESENTER_FRACTION,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), PostprocessError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(PostprocessError::TauOutOfRange(self.tau));
        }
        for (name, v) in [
            ("th_presenter", self.th_presenter),
            ("th_silence", self.th_silence),
            ("th_presenter_fraction", self.th_presenter_fraction),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PostprocessError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn presenter_threshold(&self) -> f64 {
        match self.presenter_units {
            PresenterUnits::Pixels => self.th_presenter,
            PresenterUnits::FrameFraction => self.th_presenter_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueStatus {
    Open,
    Addressed,
    Dismissed,
    SuppressedPresenter,
    SuppressedSilence,
}

impl IssueStatus {
    pub fn is_suppressed(self) -> bool {
        matches!(self, IssueStatus::SuppressedPresenter | IssueStatus::SuppressedSilence)
    }

    /// Set by the author rather than by the analysis.
    pub fn is_resolved(self) -> bool {
        matches!(self, IssueStatus::Addressed | IssueStatus::Dismissed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueOrigin {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub issue_id: String,
    pub segment_id: String,
    pub modality: Modality,
    pub score: f64,
    pub status: IssueStatus,
    pub created_from: IssueOrigin,
}

/// Filter inputs measured once at analysis time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SegmentMetrics {
    /// Face area per second (units per [`PresenterUnits`] of the run); `None`
    /// without a face sidecar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presenter_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presenter_fraction: Option<f64>,
    /// Mean windowed RMS, for non-speech and pause segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub silence: Option<f64>,
}

impl SegmentMetrics {
    fn presenter(&self, units: PresenterUnits) -> Option<f64> {
        match units {
            PresenterUnits::Pixels => self.presenter_px,
            PresenterUnits::FrameFraction => self.presenter_fraction,
        }
    }
}

/// Largest face box area per sampled timestamp in `[start, end)`, summed and
/// divided by the segment length (px²/s).
pub fn presenter_metric(segment: &VisualSegment, faces: &FaceSidecar) -> f64 {
    let total: f64 = faces
        .entries
        .iter()
        .filter(|e| e.t >= segment.start && e.t < segment.end)
        .map(|e| e.boxes.iter().map(|b| b.area()).fold(0.0, f64::max))
        .fold(0.0, |acc, a| acc + a);
    total / segment.length()
}

/// [`presenter_metric`] as a fraction of the frame area per second.
pub fn presenter_metric_fraction(segment: &VisualSegment, faces: &FaceSidecar) -> f64 {
    presenter_metric(segment, faces) / (faces.frame_width as f64 * faces.frame_height as f64)
}

/// Mean over 50 ms windows of the window RMS of the samples in `[start, end)`.
pub fn silence_metric(segment: &AudioSegment, audio: &AudioTrack) -> Result<f64, PostprocessError> {
    if segment.kind == AudioKind::Speech {
        return Err(PostprocessError::WrongKind(segment.id.clone()));
    }
    Ok(mean_window_rms(audio.slice(segment.start, segment.end), audio.sample_rate))
}

pub fn mean_window_rms(samples: &[f32], sample_rate: u32) -> f64 {
    let window = ((SILENCE_WINDOW_SECS * sample_rate as f64).round() as usize).max(1);
    if samples.is_empty() {
        return 0.0;
    }
    let rms: Vec<f64> = samples
        .chunks(window)
        .map(|w| (w.iter().map(|s| (*s as f64).powi(2)).sum::<f64>() / w.len() as f64).sqrt())
        .collect();
    rms.iter().sum::<f64>() / rms.len() as f64
}

/// Measures every filter input. Presenter metrics are absent when there is
/// no face sidecar; the second value lists such warnings.
pub fn compute_metrics(
    visual: &[VisualSegment],
    audio: &[AudioSegment],
    faces: Option<&FaceSidecar>,
    track: &AudioTrack,
) -> (BTreeMap<String, SegmentMetrics>, Vec<String>) {
    let mut metrics = BTreeMap::new();
    let mut warnings = Vec::new();
    if faces.is_none() {
        warnings.push("no face sidecar: presenter filter disabled".to_string());
    }
    for v in visual {
        let m = SegmentMetrics {
            presenter_px: faces.map(|f| presenter_metric(v, f)),
            presenter_fraction: faces.map(|f| presenter_metric_fraction(v, f)),
            silence: None,
        };
        metrics.insert(v.id.clone(), m);
    }
    for a in audio {
        let silence = silence_metric(a, track).ok();
        metrics.insert(a.id.clone(), SegmentMetrics { silence, ..Default::default() });
    }
    (metrics, warnings)
}

pub fn auto_issue_id(segment_id: &str) -> String {
    format!("auto-{segment_id}")
}

fn visual_candidate(s: &ScoredSegment, metrics: &BTreeMap<String, SegmentMetrics>, filters: &FilterConfig) -> Option<Issue> {
    if s.score >= filters.tau {
        return None;
    }
    let presenter = metrics
        .get(&s.segment_id)
        .and_then(|m| m.presenter(filters.presenter_units))
        .is_some_and(|p| p > filters.presenter_threshold());
    Some(Issue {
        issue_id: auto_issue_id(&s.segment_id),
        segment_id: s.segment_id.clone(),
        modality: Modality::Visual,
        score: s.score,
        status: if presenter { IssueStatus::SuppressedPresenter } else { IssueStatus::Open },
        created_from: IssueOrigin::Auto,
    })
}

/// Turns scores into issues.
///
/// A shot scoring below `tau` becomes an issue, suppressed when its presenter
/// metric exceeds the threshold. Every non-speech and pause segment becomes
/// an issue regardless of score, suppressed when its silence metric is below
/// the threshold. Speech yields no issue.
pub fn surface_issues(
    scored: &[ScoredSegment],
    audio: &[AudioSegment],
    metrics: &BTreeMap<String, SegmentMetrics>,
    filters: &FilterConfig,
) -> Vec<Issue> {
    let kinds: HashMap<&str, AudioKind> = audio.iter().map(|a| (a.id.as_str(), a.kind)).collect();
    let mut issues = Vec::new();
    for s in scored {
        match s.modality {
            Modality::Visual => issues.extend(visual_candidate(s, metrics, filters)),
            Modality::Audio => {
                if kinds.get(s.segment_id.as_str()).is_none_or(|k| *k == AudioKind::Speech) {
                    continue;
                }
                let silent = metrics
                    .get(&s.segment_id)
                    .and_then(|m| m.silence)
                    .is_some_and(|x| x < filters.th_silence);
                issues.push(Issue {
                    issue_id: auto_issue_id(&s.segment_id),
                    segment_id: s.segment_id.clone(),
                    modality: Modality::Audio,
                    score: s.score,
                    status: if silent { IssueStatus::SuppressedSilence } else { IssueStatus::Open },
                    created_from: IssueOrigin::Auto,
                });
            }
        }
    }
    issues
}

/// Recomputes automatic shot issues for a new `tau`.
///
/// Shots below the new threshold keep their existing issue (and status) or
/// gain a fresh one. Shots at or above it lose their automatic issue unless
/// the author already addressed or dismissed it. Audio and manual issues are
/// untouched. Output is ordered by modality, segment order, then origin.
pub fn refilter(
    issues: &[Issue],
    scored: &[ScoredSegment],
    metrics: &BTreeMap<String, SegmentMetrics>,
    filters: &FilterConfig,
    new_tau: f64,
) -> Result<Vec<Issue>, PostprocessError> {
    if !(0.0..=1.0).contains(&new_tau) {
        return Err(PostprocessError::TauOutOfRange(new_tau));
    }
    let filters = FilterConfig { tau: new_tau, ..*filters };
    let is_auto_visual = |i: &Issue| i.modality == Modality::Visual && i.created_from == IssueOrigin::Auto;
    let existing: HashMap<&str, &Issue> = issues
        .iter()
        .filter(|i| is_auto_visual(i))
        .map(|i| (i.segment_id.as_str(), i))
        .collect();

    let mut out: Vec<Issue> = issues.iter().filter(|i| !is_auto_visual(i)).cloned().collect();
    for s in scored.iter().filter(|s| s.modality == Modality::Visual) {
        let prior = existing.get(s.segment_id.as_str());
        match visual_candidate(s, metrics, &filters) {
            Some(fresh) => out.push(prior.map_or(fresh, |p| (*p).clone())),
            None => out.extend(prior.filter(|p| p.status.is_resolved()).map(|p| (*p).clone())),
        }
    }
    sort_issues(&mut out, scored);
    Ok(out)
}

/// Canonical issue order: visual before audio, then segment order, auto before manual.
pub fn sort_issues(issues: &mut [Issue], scored: &[ScoredSegment]) {
    let order: HashMap<&str, usize> = scored.iter().enumerate().map(|(k, s)| (s.segment_id.as_str(), k)).collect();
    issues.sort_by_key(|i| {
        (i.modality, order.get(i.segment_id.as_str()).copied().unwrap_or(usize::MAX), i.created_from)
    });
}
