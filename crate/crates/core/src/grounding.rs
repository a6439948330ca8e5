//! Cross-modal grounding: matching matrices and per-segment accessibility
//! scores.
//!
//! A shot's score is the temporally weighted sum of its matches with every
//! audio segment, using the visual-text matrix against speech and the
//! visual-audio matrix against non-speech sound. A non-speech segment's score
//! is the weighted sum of its visual-audio matches; speech is pinned as
//! accessible.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::Embedding;
use crate::segmentation::{AudioKind, AudioSegment, Span, VisualSegment};
use crate::Modality;

pub const DEFAULT_TEMPORAL_W: f64 = 0.45;
pub const TEMPORAL_PERIOD_SECS: f64 = 5.0;
/// Raw score assigned to speech segments before normalization pins them at 1.
pub const DEFAULT_SPEECH_CONSTANT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum GroundingError {
    #[error("dimension mismatch: visual dim {visual}, other dim {other}")]
    DimensionMismatch { visual: usize, other: usize },
    #[error("matrix axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("segment index {index} out of range for {len} segments")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("matrix file format error: {0}")]
    FormatError(String),
    #[error("matrix shape {found_rows}x{found_cols} does not match {rows} shots x {cols} audio segments")]
    ShapeMismatch { rows: usize, cols: usize, found_rows: usize, found_cols: usize },
    #[error("invalid temporal weighting: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    VisualText,
    VisualAudio,
}

/// `rows x cols` similarity scores, row = shot index, column = audio segment
/// index. `raw_values` entries are `None` where the column has no embedding
/// of the matrix's kind (or a zero-flagged one); those cells normalize to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMatrix {
    pub kind: MatrixKind,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Vec<f64>>,
    pub raw_values: Vec<Vec<Option<f64>>>,
}

impl MatchingMatrix {
    /// Min-max normalizes the valid raw cells over the whole matrix. A
    /// constant matrix maps to 0.5; invalid cells map to 0.
    pub fn from_raw(kind: MatrixKind, raw_values: Vec<Vec<Option<f64>>>) -> Self {
        let rows = raw_values.len();
        let cols = raw_values.first().map_or(0, Vec::len);
        let valid = raw_values.iter().flatten().flatten().copied();
        let (lo, hi) = valid.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let values = raw_values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| match cell {
                        None => 0.0,
                        Some(_) if hi <= lo => 0.5,
                        Some(x) => (x - lo) / (hi - lo),
                    })
                    .collect()
            })
            .collect();
        Self { kind, rows, cols, values, raw_values }
    }

    /// Already-normalized values (every cell valid).
    pub fn from_normalized(kind: MatrixKind, values: Vec<Vec<f64>>) -> Self {
        let rows = values.len();
        let cols = values.first().map_or(0, Vec::len);
        let raw_values = values.iter().map(|r| r.iter().map(|x| Some(*x)).collect()).collect();
        Self { kind, rows, cols, values, raw_values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// SHA-256 over the normalized values (row-major, little-endian f64), hex.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.rows as u64).to_le_bytes());
        hasher.update((self.cols as u64).to_le_bytes());
        for x in self.values.iter().flatten() {
            hasher.update(x.to_le_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Dot products of every visual embedding with every column embedding.
/// `None` columns (and zero-flagged embeddings on either side) are excluded.
pub fn compute_matrix(
    visual: &[Embedding],
    others: &[Option<Embedding>],
    kind: MatrixKind,
) -> Result<MatchingMatrix, GroundingError> {
    if visual.is_empty() {
        return Err(GroundingError::EmptyAxis("visual"));
    }
    if others.is_empty() {
        return Err(GroundingError::EmptyAxis("audio"));
    }
    let dim = visual[0].dim();
    for e in visual.iter().chain(others.iter().flatten()) {
        if e.dim() != dim {
            return Err(GroundingError::DimensionMismatch { visual: dim, other: e.dim() });
        }
    }
    let raw = visual
        .iter()
        .map(|v| {
            others
                .iter()
                .map(|o| match o {
                    Some(o) if !o.zero && !v.zero => Some(v.dot(o)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(MatchingMatrix::from_raw(kind, raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAnchor {
    Midpoint,
    Start,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemporalWeightConfig {
    pub w: f64,
    pub period: f64,
    pub anchor: TimeAnchor,
}

impl Default for TemporalWeightConfig {
    fn default() -> Self {
        Self { w: DEFAULT_TEMPORAL_W, period: TEMPORAL_PERIOD_SECS, anchor: TimeAnchor::Midpoint }
    }
}

impl TemporalWeightConfig {
    pub fn validate(&self) -> Result<(), GroundingError> {
        if !(self.w > 0.0 && self.w <= 1.0) {
            return Err(GroundingError::InvalidConfig(format!("w must be in (0, 1], got {}", self.w)));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(GroundingError::InvalidConfig(format!("period must be positive, got {}", self.period)));
        }
        Ok(())
    }

    pub fn timestamp(&self, span: &impl Span) -> f64 {
        match self.anchor {
            TimeAnchor::Midpoint => span.midpoint(),
            TimeAnchor::Start => span.start(),
        }
    }
}

/// `w ^ (|ts_i - ts_j| / period)`.
pub fn temporal_weight(ts_i: f64, ts_j: f64, cfg: &TemporalWeightConfig) -> f64 {
    cfg.w.powf((ts_i - ts_j).abs() / cfg.period)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub segment_id: String,
    pub weighted_score: f64,
    /// Start time of the contributing segment, used for tie-breaking.
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub segment_id: String,
    pub modality: Modality,
    pub raw_score: f64,
    /// Normalized accessibility in [0, 1]; higher is more accessible.
    pub score: f64,
    /// Speech segments carry a constant and sit outside the normalization pool.
    pub fixed: bool,
    pub contributions: Vec<Contribution>,
}

fn sort_contributions(c: &mut [Contribution]) {
    c.sort_by(|a, b| {
        b.weighted_score
            .total_cmp(&a.weighted_score)
            .then(a.start.total_cmp(&b.start))
    });
}

fn check_shape(m: &MatchingMatrix, rows: usize, cols: usize) -> Result<(), GroundingError> {
    if m.rows != rows || m.cols != cols {
        return Err(GroundingError::ShapeMismatch { rows, cols, found_rows: m.rows, found_cols: m.cols });
    }
    Ok(())
}

/// Weighted sum over audio segments: visual-text values for speech columns,
/// visual-audio values for non-speech columns, nothing for pauses.
pub fn score_visual(
    i: usize,
    visual_text: &MatchingMatrix,
    visual_audio: &MatchingMatrix,
    visual: &[VisualSegment],
    audio: &[AudioSegment],
    cfg: &TemporalWeightConfig,
) -> Result<ScoredSegment, GroundingError> {
    let seg = visual.get(i).ok_or(GroundingError::IndexOutOfRange { index: i, len: visual.len() })?;
    check_shape(visual_text, visual.len(), audio.len())?;
    check_shape(visual_audio, visual.len(), audio.len())?;
    let ts_i = cfg.timestamp(seg);
    let mut contributions: Vec<Contribution> = audio
        .iter()
        .enumerate()
        .filter_map(|(j, a)| {
            let m = match a.kind {
                AudioKind::Speech => visual_text.get(i, j),
                AudioKind::NonSpeech => visual_audio.get(i, j),
                AudioKind::Pause => return None,
            };
            let weighted_score = temporal_weight(ts_i, cfg.timestamp(a), cfg) * m;
            Some(Contribution { segment_id: a.id.clone(), weighted_score, start: a.start })
        })
        .collect();
    let raw_score = contributions.iter().fold(0.0, |acc, c| acc + c.weighted_score);
    sort_contributions(&mut contributions);
    Ok(ScoredSegment {
        segment_id: seg.id.clone(),
        modality: Modality::Visual,
        raw_score,
        score: 0.0,
        fixed: false,
        contributions,
    })
}

/// Speech is fixed at `speech_constant`; non-speech is the weighted sum of
/// its visual-audio column; pauses score 0 and are left to the silence filter.
pub fn score_audio(
    j: usize,
    visual_audio: &MatchingMatrix,
    visual: &[VisualSegment],
    audio: &[AudioSegment],
    cfg: &TemporalWeightConfig,
    speech_constant: f64,
) -> Result<ScoredSegment, GroundingError> {
    let seg = audio.get(j).ok_or(GroundingError::IndexOutOfRange { index: j, len: audio.len() })?;
    check_shape(visual_audio, visual.len(), audio.len())?;
    let mut scored = ScoredSegment {
        segment_id: seg.id.clone(),
        modality: Modality::Audio,
        raw_score: 0.0,
        score: 0.0,
        fixed: false,
        contributions: Vec::new(),
    };
    match seg.kind {
        AudioKind::Speech => {
            scored.raw_score = speech_constant;
            scored.fixed = true;
        }
        AudioKind::Pause => {}
        AudioKind::NonSpeech => {
            let ts_j = cfg.timestamp(seg);
            scored.contributions = visual
                .iter()
                .enumerate()
                .map(|(i, v)| Contribution {
                    segment_id: v.id.clone(),
                    weighted_score: temporal_weight(ts_j, cfg.timestamp(v), cfg) * visual_audio.get(i, j),
                    start: v.start,
                })
                .collect();
            scored.raw_score = scored.contributions.iter().fold(0.0, |acc, c| acc + c.weighted_score);
            sort_contributions(&mut scored.contributions);
        }
    }
    Ok(scored)
}

/// Min-max normalizes the non-fixed raw scores of one modality; a constant
/// pool maps to 0.5 and fixed (speech) scores are pinned to 1.0. Segments of
/// the other modality pass through untouched.
pub fn normalize_scores(mut scored: Vec<ScoredSegment>, modality: Modality) -> Vec<ScoredSegment> {
    let pool = scored
        .iter()
        .filter(|s| s.modality == modality && !s.fixed)
        .map(|s| s.raw_score);
    let (lo, hi) = pool.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    for s in scored.iter_mut().filter(|s| s.modality == modality) {
        s.score = if s.fixed {
            1.0
        } else if hi <= lo {
            0.5
        } else {
            ((s.raw_score - lo) / (hi - lo)).clamp(0.0, 1.0)
        };
    }
    scored
}

/// Scores every shot and audio segment and normalizes both modalities.
pub fn score_all(
    visual_text: &MatchingMatrix,
    visual_audio: &MatchingMatrix,
    visual: &[VisualSegment],
    audio: &[AudioSegment],
    cfg: &TemporalWeightConfig,
    speech_constant: f64,
) -> Result<Vec<ScoredSegment>, GroundingError> {
    cfg.validate()?;
    let mut scored = Vec::with_capacity(visual.len() + audio.len());
    for i in 0..visual.len() {
        scored.push(score_visual(i, visual_text, visual_audio, visual, audio, cfg)?);
    }
    for j in 0..audio.len() {
        scored.push(score_audio(j, visual_audio, visual, audio, cfg, speech_constant)?);
    }
    let scored = normalize_scores(scored, Modality::Visual);
    Ok(normalize_scores(scored, Modality::Audio))
}

/// The `k` strongest contributions to a segment's score.
pub fn top_matches(scored: &[ScoredSegment], segment_id: &str, k: usize) -> Result<Vec<Contribution>, GroundingError> {
    let seg = scored
        .iter()
        .find(|s| s.segment_id == segment_id)
        .ok_or_else(|| GroundingError::UnknownSegment(segment_id.to_string()))?;
    Ok(seg.contributions.iter().take(k).cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixBlock {
    pub raw: bool,
    pub values: Vec<Vec<f64>>,
}

/// Offline matrices: `{"version":1, "n_v":.., "n_a":.., "visual_text":{"raw":bool,"values":[[..]]}, "visual_audio":{..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub version: u32,
    pub n_v: usize,
    pub n_a: usize,
    pub visual_text: MatrixBlock,
    pub visual_audio: MatrixBlock,
}

impl MatrixDocument {
    pub fn parse(text: &str) -> Result<Self, GroundingError> {
        let doc: Self = serde_json::from_str(text).map_err(|e| GroundingError::FormatError(e.to_string()))?;
        if doc.version != 1 {
            return Err(GroundingError::FormatError(format!("unsupported version {}", doc.version)));
        }
        for (name, block) in [("visual_text", &doc.visual_text), ("visual_audio", &doc.visual_audio)] {
            if block.values.len() != doc.n_v || block.values.iter().any(|r| r.len() != doc.n_a) {
                return Err(GroundingError::FormatError(format!(
                    "`{name}` is not {}x{} as declared",
                    doc.n_v, doc.n_a
                )));
            }
            if let Some(x) = block.values.iter().flatten().find(|x| !x.is_finite()) {
                return Err(GroundingError::FormatError(format!("`{name}` holds non-finite value {x}")));
            }
            if !block.raw {
                if let Some(x) = block.values.iter().flatten().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(GroundingError::FormatError(format!(
                        "`{name}` is marked normalized but holds {x}"
                    )));
                }
            }
        }
        Ok(doc)
    }

    /// Both matrices, checked against the segment counts.
    pub fn to_matrices(&self, n_v: usize, n_a: usize) -> Result<(MatchingMatrix, MatchingMatrix), GroundingError> {
        if self.n_v != n_v || self.n_a != n_a {
            return Err(GroundingError::ShapeMismatch { rows: n_v, cols: n_a, found_rows: self.n_v, found_cols: self.n_a });
        }
        let build = |kind, block: &MatrixBlock| {
            if block.raw {
                MatchingMatrix::from_raw(kind, block.values.iter().map(|r| r.iter().map(|x| Some(*x)).collect()).collect())
            } else {
                MatchingMatrix::from_normalized(kind, block.values.clone())
            }
        };
        Ok((build(MatrixKind::VisualText, &self.visual_text), build(MatrixKind::VisualAudio, &self.visual_audio)))
    }
}

pub fn load_matrix_file(path: &Path, n_v: usize, n_a: usize) -> Result<(MatchingMatrix, MatchingMatrix), GroundingError> {
    let text = std::fs::read_to_string(path).map_err(|e| GroundingError::FormatError(e.to_string()))?;
    MatrixDocument::parse(&text)?.to_matrices(n_v, n_a)
}
