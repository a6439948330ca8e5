//! Scoring predicted issues against human labels, plus two baselines.
//!
//! A prediction is a true positive when some label of the same modality
//! covers more than half of it. Several predictions may match one label;
//! precision counts predictions while recall counts labels.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::postprocess::IssueStatus;
use crate::project::Project;
use crate::segmentation::{AudioKind, AudioSegment, Span, VisualSegment};
use crate::Modality;

pub const LABEL_FILE_VERSION: u32 = 1;
/// Overlap ratio a prediction must exceed to match a label.
pub const MATCH_RATIO: f64 = 0.5;

/// Published results on the authors' 20-video labeled sample. These need the
/// original corpus and models and are kept for reference only.
pub mod reference {
    pub struct Row {
        pub precision: f64,
        pub recall: f64,
        pub f1: f64,
    }
    pub const VISUAL_RANDOM: Row = Row { precision: 0.275, recall: 0.390, f1: 0.323 };
    pub const VISUAL_GAPS: Row = Row { precision: 0.833, recall: 0.385, f1: 0.526 };
    pub const VISUAL_CROSSMODAL: Row = Row { precision: 0.694, recall: 0.984, f1: 0.814 };
    pub const AUDIO_RANDOM: Row = Row { precision: 0.125, recall: 0.381, f1: 0.188 };
    pub const AUDIO_GAPS: Row = Row { precision: 0.909, recall: 0.843, f1: 0.874 };
    pub const AUDIO_CROSSMODAL: Row = Row { precision: 0.983, recall: 0.843, f1: 0.908 };
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label file: {0}")]
    FormatError(String),
    #[error("label {index}: {reason}")]
    InvalidLabel { index: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLabel {
    pub modality: Modality,
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub modality: Modality,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Overlap divided by the prediction's length.
    #[default]
    Pred,
    /// Overlap divided by the label's length.
    Label,
    /// Overlap divided by the shorter of the two.
    Min,
}

impl std::str::FromStr for OverlapMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pred" => Ok(Self::Pred),
            "label" => Ok(Self::Label),
            "min" => Ok(Self::Min),
            other => Err(format!("unknown overlap mode `{other}` (pred, label, min)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Crossmodal,
    Gaps,
    Random,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "crossmodal" => Ok(Self::Crossmodal),
            "gaps" => Ok(Self::Gaps),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown method `{other}` (crossmodal, gaps, random)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    /// Predictions matching a label.
    pub tp: usize,
    /// Predictions matching nothing.
    pub fp: usize,
    /// Labels matched by nothing.
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Labels matched by at least one prediction.
    pub matched_labels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matched_labels: usize,
    pub predictions: usize,
    pub labels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub overlap_mode: OverlapMode,
    pub visual: ModalityReport,
    pub audio: ModalityReport,
}

pub fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

fn matches(p: &Prediction, l: &EvalLabel, mode: OverlapMode) -> bool {
    if p.modality != l.modality {
        return false;
    }
    let ov = overlap((p.start, p.end), (l.start, l.end));
    let denom = match mode {
        OverlapMode::Pred => p.end - p.start,
        OverlapMode::Label => l.end - l.start,
        OverlapMode::Min => (p.end - p.start).min(l.end - l.start),
    };
    denom > 0.0 && ov / denom > MATCH_RATIO
}

pub fn match_predictions(predicted: &[Prediction], labels: &[EvalLabel], mode: OverlapMode) -> MatchCounts {
    let mut hit = vec![false; labels.len()];
    let mut counts = MatchCounts::default();
    for p in predicted {
        let mut any = false;
        for (k, l) in labels.iter().enumerate() {
            if matches(p, l, mode) {
                hit[k] = true;
                any = true;
            }
        }
        if any {
            counts.tp += 1;
        } else {
            counts.fp += 1;
        }
    }
    counts.matched_labels = hit.iter().filter(|h| **h).count();
    counts.fn_ = labels.len() - counts.matched_labels;
    counts
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// (precision, recall, f1) from plain counts.
pub fn metrics(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    (p, r, f1(p, r))
}

pub fn modality_report(predicted: &[Prediction], labels: &[EvalLabel], modality: Modality, mode: OverlapMode) -> ModalityReport {
    let preds: Vec<Prediction> = predicted.iter().filter(|p| p.modality == modality).copied().collect();
    let labs: Vec<EvalLabel> = labels.iter().filter(|l| l.modality == modality).cloned().collect();
    let c = match_predictions(&preds, &labs, mode);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.matched_labels, c.matched_labels + c.fn_);
    ModalityReport {
        precision,
        recall,
        f1: f1(precision, recall),
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        matched_labels: c.matched_labels,
        predictions: preds.len(),
        labels: labs.len(),
    }
}

pub fn evaluate(
    predicted: &[Prediction],
    labels: &[EvalLabel],
    mode: OverlapMode,
    method: Method,
    seed: Option<u64>,
) -> EvalReport {
    EvalReport {
        version: 1,
        method,
        seed,
        overlap_mode: mode,
        visual: modality_report(predicted, labels, Modality::Visual, mode),
        audio: modality_report(predicted, labels, Modality::Audio, mode),
    }
}

fn is_gap(a: &AudioSegment) -> bool {
    a.kind != AudioKind::Speech
}

/// Everything that is not speech: gap segments in audio, and shots whose
/// midpoint falls inside a gap.
pub fn baseline_gaps(visual: &[VisualSegment], audio: &[AudioSegment]) -> Vec<Prediction> {
    let gaps: Vec<&AudioSegment> = audio.iter().filter(|a| is_gap(a)).collect();
    let last_end = audio.last().map_or(0.0, |a| a.end);
    let in_gap = |t: f64| gaps.iter().any(|g| t >= g.start && (t < g.end || (g.end == last_end && t <= g.end)));
    visual
        .iter()
        .filter(|v| in_gap(v.midpoint()))
        .map(|v| Prediction { modality: Modality::Visual, start: v.start, end: v.end })
        .chain(gaps.iter().map(|g| Prediction { modality: Modality::Audio, start: g.start, end: g.end }))
        .collect()
}

/// Each segment independently predicted with probability one half. Visual
/// segments draw first, then audio, from one seeded stream.
pub fn baseline_random(visual: &[VisualSegment], audio: &[AudioSegment], seed: u64) -> Vec<Prediction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for v in visual {
        if rng.random_bool(0.5) {
            out.push(Prediction { modality: Modality::Visual, start: v.start, end: v.end });
        }
    }
    for a in audio {
        if rng.random_bool(0.5) {
            out.push(Prediction { modality: Modality::Audio, start: a.start, end: a.end });
        }
    }
    out
}

/// Open issues of an analyzed project.
pub fn crossmodal_predictions(project: &Project) -> Vec<Prediction> {
    project
        .issues
        .iter()
        .filter(|i| i.status == IssueStatus::Open)
        .filter_map(|i| {
            let (start, end) = match i.modality {
                Modality::Visual => project.visual_segments.iter().find(|s| s.id == i.segment_id).map(|s| (s.start, s.end)),
                Modality::Audio => project.audio_segments.iter().find(|s| s.id == i.segment_id).map(|s| (s.start, s.end)),
            }?;
            Some(Prediction { modality: i.modality, start, end })
        })
        .collect()
}

/// Predictions of `method` over an analyzed project. `seed` only matters
/// for the random baseline.
pub fn predictions(method: Method, project: &Project, seed: u64) -> Vec<Prediction> {
    match method {
        Method::Crossmodal => crossmodal_predictions(project),
        Method::Gaps => baseline_gaps(&project.visual_segments, &project.audio_segments),
        Method::Random => baseline_random(&project.visual_segments, &project.audio_segments, seed),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelFile {
    Bare(Vec<EvalLabel>),
    Versioned { version: u32, labels: Vec<EvalLabel> },
}

/// Accepts a bare `[{modality, start, end, note}]` array or
/// `{"version": 1, "labels": [...]}`.
pub fn parse_labels(text: &str, duration: Option<f64>) -> Result<Vec<EvalLabel>, EvalError> {
    let file: LabelFile = serde_json::from_str(text).map_err(|e| EvalError::FormatError(e.to_string()))?;
    let labels = match file {
        LabelFile::Bare(l) => l,
        LabelFile::Versioned { version, labels } => {
            if version != LABEL_FILE_VERSION {
                return Err(EvalError::FormatError(format!("unsupported version {version}")));
            }
            labels
        }
    };
    for (index, l) in labels.iter().enumerate() {
        if !(l.start >= 0.0 && l.start < l.end) {
            return Err(EvalError::InvalidLabel { index, reason: format!("bad interval [{}, {}]", l.start, l.end) });
        }
        if let Some(d) = duration {
            if l.end > d {
                return Err(EvalError::InvalidLabel { index, reason: format!("ends at {} past duration {d}", l.end) });
            }
        }
    }
    Ok(labels)
}

pub fn load_labels(path: &Path, duration: Option<f64>) -> Result<Vec<EvalLabel>, EvalError> {
    parse_labels(&std::fs::read_to_string(path)?, duration)
}
