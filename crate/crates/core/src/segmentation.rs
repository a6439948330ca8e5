//! Shot detection on HSV frame differences and word-gap audio segmentation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{FrameSeries, HsvFrame, WordTiming};

pub const DEFAULT_CONTENT_THRESHOLD: f64 = 27.0;
/// Gaps at least this long are non-speech segments.
pub const NON_SPEECH_MIN_GAP: f64 = 2.0;
/// Gaps at least this long (and shorter than [`NON_SPEECH_MIN_GAP`]) are pauses.
pub const PAUSE_MIN_GAP: f64 = 0.5;
/// Slack for gap comparisons so that e.g. `3.4 - 1.4` still counts as 2.0 s.
const GAP_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("no frames to segment")]
    EmptyFrames,
    #[error("content threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("word {index} overlaps or precedes the previous word")]
    OverlappingWords { index: usize },
    #[error("word {index} lies outside [0, duration]")]
    WordOutOfRange { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualSegment {
    pub id: String,
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub representative_frames: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioKind {
    Speech,
    NonSpeech,
    Pause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSegment {
    pub id: String,
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub kind: AudioKind,
    pub transcript: String,
}

/// Time span accessors shared by both segment kinds.
pub trait Span {
    fn id(&self) -> &str;
    fn start(&self) -> f64;
    fn end(&self) -> f64;
    fn midpoint(&self) -> f64 {
        (self.start() + self.end()) / 2.0
    }
    fn length(&self) -> f64 {
        self.end() - self.start()
    }
}

impl Span for VisualSegment {
    fn id(&self) -> &str {
        &self.id
    }
    fn start(&self) -> f64 {
        self.start
    }
    fn end(&self) -> f64 {
        self.end
    }
}

impl Span for AudioSegment {
    fn id(&self) -> &str {
        &self.id
    }
    fn start(&self) -> f64 {
        self.start
    }
    fn end(&self) -> f64 {
        self.end
    }
}

/// Mean absolute difference over every pixel and HSV channel, 0..=255.
pub fn frame_delta(a: &HsvFrame, b: &HsvFrame) -> f64 {
    let total: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x.abs_diff(*y) as u64)
        .sum();
    total as f64 / a.data.len().max(1) as f64
}

/// Splits the timeline into shots, cutting between adjacent frames whose
/// [`frame_delta`] exceeds `content_threshold`. Segments tile `[0, duration]`.
pub fn detect_shots(
    frames: &FrameSeries,
    content_threshold: f64,
    duration: f64,
) -> Result<Vec<VisualSegment>, SegmentationError> {
    if frames.is_empty() {
        return Err(SegmentationError::EmptyFrames);
    }
    if !(content_threshold > 0.0) {
        return Err(SegmentationError::InvalidThreshold(content_threshold));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SegmentationError::InvalidDuration(duration));
    }

    let mut bounds = vec![0.0];
    for pair in frames.frames.windows(2) {
        let cut = pair[1].timestamp;
        if cut > 0.0 && cut < duration && frame_delta(&pair[0].pixels, &pair[1].pixels) > content_threshold {
            bounds.push(cut);
        }
    }
    bounds.push(duration);

    Ok(bounds
        .windows(2)
        .enumerate()
        .map(|(index, w)| {
            let (start, end) = (w[0], w[1]);
            let representative_frames = frames
                .frames
                .iter()
                .enumerate()
                .filter(|(_, f)| f.timestamp >= start && f.timestamp < end)
                .map(|(k, _)| k)
                .collect();
            VisualSegment { id: format!("v{index}"), index, start, end, representative_frames }
        })
        .collect())
}

fn classify_gap(length: f64) -> Option<AudioKind> {
    if length >= NON_SPEECH_MIN_GAP - GAP_EPS {
        Some(AudioKind::NonSpeech)
    } else if length >= PAUSE_MIN_GAP - GAP_EPS {
        Some(AudioKind::Pause)
    } else {
        None
    }
}

/// Splits `[0, duration]` into speech, non-speech and pause segments from the
/// gaps between words.
///
/// Gaps of 2.0 s or more are non-speech, gaps in [0.5, 2.0) are pauses, and
/// words separated by shorter gaps merge into one speech segment. Leading and
/// trailing silence count as gaps; when shorter than 0.5 s they are absorbed
/// by the adjacent speech segment so the segments still tile the timeline.
pub fn segment_audio(words: &[WordTiming], duration: f64) -> Result<Vec<AudioSegment>, SegmentationError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SegmentationError::InvalidDuration(duration));
    }
    for (index, w) in words.iter().enumerate() {
        if !(w.start >= 0.0 && w.start < w.end && w.end <= duration) {
            return Err(SegmentationError::WordOutOfRange { index });
        }
        if index > 0 && w.start < words[index - 1].end {
            return Err(SegmentationError::OverlappingWords { index });
        }
    }

    // (kind, start, end, word range)
    let mut spans: Vec<(AudioKind, f64, f64, std::ops::Range<usize>)> = Vec::new();
    if words.is_empty() {
        let kind = classify_gap(duration).unwrap_or(AudioKind::Pause);
        spans.push((kind, 0.0, duration, 0..0));
    } else {
        let mut runs: Vec<std::ops::Range<usize>> = vec![0..1];
        for i in 1..words.len() {
            if classify_gap(words[i].start - words[i - 1].end).is_some() {
                runs.push(i..i + 1);
            } else {
                runs.last_mut().unwrap().end = i + 1;
            }
        }

        let first_start = words[0].start;
        let leading = classify_gap(first_start);
        if let Some(kind) = leading {
            spans.push((kind, 0.0, first_start, 0..0));
        }
        for (r, run) in runs.iter().enumerate() {
            let mut start = words[run.start].start;
            if r == 0 && leading.is_none() {
                start = 0.0;
            }
            let end = words[run.end - 1].end;
            if r > 0 {
                let prev_end = spans.last().unwrap().2;
                let kind = classify_gap(start - prev_end).unwrap_or(AudioKind::Pause);
                spans.push((kind, prev_end, start, 0..0));
            }
            spans.push((AudioKind::Speech, start, end, run.clone()));
        }
        let last_end = spans.last().unwrap().2;
        match classify_gap(duration - last_end) {
            Some(kind) => spans.push((kind, last_end, duration, 0..0)),
            None => spans.last_mut().unwrap().2 = duration,
        }
    }

    Ok(spans
        .into_iter()
        .filter(|(_, s, e, _)| e > s)
        .enumerate()
        .map(|(index, (kind, start, end, range))| AudioSegment {
            id: format!("a{index}"),
            index,
            start,
            end,
            kind,
            transcript: words[range].iter().map(|w| w.word.as_str()).collect::<Vec<_>>().join(" "),
        })
        .collect())
}

/// Rebuilds speech transcripts from the words whose midpoints fall in each
/// speech segment; other kinds get an empty transcript.
pub fn assign_transcripts(segments: &[AudioSegment], words: &[WordTiming]) -> Vec<AudioSegment> {
    let last = segments.len().saturating_sub(1);
    segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            let transcript = if seg.kind == AudioKind::Speech {
                words
                    .iter()
                    .filter(|w| {
                        let m = w.midpoint();
                        m >= seg.start && (m < seg.end || (k == last && m <= seg.end))
                    })
                    .map(|w| w.word.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            } else {
                String::new()
            };
            AudioSegment { transcript, ..seg.clone() }
        })
        .collect()
}
