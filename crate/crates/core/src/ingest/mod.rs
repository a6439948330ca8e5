//! Media bundle loading.
//!
//! A bundle is a directory holding a `bundle.toml` manifest plus the parts it
//! names: frames (a `frame_%06d.png` directory, a raw HSV container, or a
//! video file handed to the external decoder), a 16-bit PCM WAV, a
//! tab-separated word-timed transcript and optional sidecars.

mod audio;
mod decode;
mod frames;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audio::{read_wav, write_wav, AudioTrack, DEFAULT_SAMPLE_RATE};
pub use decode::{decode_external, DecoderConfig, DECODER_ENV};
pub use frames::{
    hsv_to_rgb, read_png_dir, read_raw_frames, rgb_to_hsv, write_png, write_raw_frames, Frame, FrameSeries,
    HsvFrame,
};

use crate::embedding::EmbeddingDocument;
use crate::grounding::MatrixDocument;

pub const MANIFEST_FILE: &str = "bundle.toml";

/// Allowed disagreement between the declared duration and each part's extent.
pub const DURATION_TOLERANCE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing bundle part `{part}` ({})", path.display())]
    MissingPart { part: String, path: PathBuf },
    #[error("malformed bundle part `{part}`: {reason}")]
    MalformedPart { part: String, reason: String },
    #[error("duration mismatch: `{part}` covers {found:.3}s but bundle declares {declared:.3}s")]
    DurationMismatch { part: String, found: f64, declared: f64 },
    #[error("decoder unavailable: {0}")]
    DecoderUnavailable(String),
    #[error("decoder failed (status {status:?}): {diagnostics}")]
    DecodeFailed { status: Option<i32>, diagnostics: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(part: &str, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedPart { part: part.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTiming {
    pub word: String,
    pub start: f64,
    pub end: f64,
}

impl WordTiming {
    pub fn new(word: impl Into<String>, start: f64, end: f64) -> Self {
        Self { word: word.into(), start, end }
    }

    pub fn midpoint(&self) -> f64 {
        (self.start + self.end) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl FaceBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceEntry {
    pub t: f64,
    pub boxes: Vec<FaceBox>,
}

/// Face boxes per sampled timestamp, in pixels of a `frame_width x frame_height` frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSidecar {
    pub frame_width: u32,
    pub frame_height: u32,
    pub entries: Vec<FaceEntry>,
}

impl FaceSidecar {
    pub fn validate(&self) -> Result<(), String> {
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err("frame dimensions must be positive".into());
        }
        for pair in self.entries.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(format!("timestamps not increasing at t={}", pair[1].t));
            }
        }
        let (fw, fh) = (self.frame_width as f64, self.frame_height as f64);
        for e in &self.entries {
            for b in &e.boxes {
                let inside = b.x >= 0.0 && b.y >= 0.0 && b.w >= 0.0 && b.h >= 0.0 && b.x + b.w <= fw && b.y + b.h <= fh;
                if !inside {
                    return Err(format!("box {b:?} at t={} outside {fw}x{fh} frame", e.t));
                }
            }
        }
        Ok(())
    }
}

/// Everything the analysis needs about one video.
#[derive(Debug, Clone, PartialEq)]
pub struct MediaBundle {
    pub video_id: String,
    pub duration: f64,
    pub frames: FrameSeries,
    pub audio: AudioTrack,
    pub words: Vec<WordTiming>,
    pub faces: Option<FaceSidecar>,
    pub embeddings: Option<EmbeddingDocument>,
    pub matrices: Option<MatrixDocument>,
}

impl MediaBundle {
    /// Checks every cross-part invariant; `load_bundle` calls this last.
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(malformed("manifest", format!("duration must be positive, got {}", self.duration)));
        }
        if self.frames.is_empty() {
            return Err(malformed("frames", "no frames"));
        }
        check_extent("frames", self.frames.covered_until(), self.duration)?;
        check_extent("audio", self.audio.duration(), self.duration)?;
        validate_words(&self.words).map_err(|r| malformed("transcript", r))?;
        if let Some(last) = self.words.last() {
            if last.end > self.duration {
                return Err(IngestError::DurationMismatch {
                    part: "transcript".into(),
                    found: last.end,
                    declared: self.duration,
                });
            }
        }
        if let Some(faces) = &self.faces {
            faces.validate().map_err(|r| malformed("faces", r))?;
        }
        Ok(())
    }

    /// Writes this bundle as a directory `load_bundle` reads back unchanged.
    ///
    /// Frames go to the lossless raw container, audio to 16-bit PCM (exact
    /// for samples already on the 16-bit grid, as loaded samples are).
    pub fn write_to(&self, dir: &Path) -> Result<(), IngestError> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = Manifest {
            video_id: self.video_id.clone(),
            duration: self.duration,
            fps: Some(self.frames.fps),
            frames_file: Some("frames.hsv".into()),
            audio_file: Some("audio.wav".into()),
            transcript_file: Some("transcript.tsv".into()),
            ..Manifest::default()
        };
        write_raw_frames(&dir.join("frames.hsv"), &self.frames)?;
        write_wav(&dir.join("audio.wav"), &self.audio).map_err(|r| malformed("audio", r))?;
        std::fs::write(dir.join("transcript.tsv"), format_transcript(&self.words))?;
        if let Some(faces) = &self.faces {
            manifest.faces_file = Some("faces.json".into());
            std::fs::write(dir.join("faces.json"), to_json(faces)?)?;
        }
        if let Some(doc) = &self.embeddings {
            manifest.embeddings_file = Some("embeddings.json".into());
            std::fs::write(dir.join("embeddings.json"), to_json(doc)?)?;
        }
        if let Some(doc) = &self.matrices {
            manifest.matrices_file = Some("matrices.json".into());
            std::fs::write(dir.join("matrices.json"), to_json(doc)?)?;
        }
        let text = toml::to_string(&manifest).map_err(|e| malformed("manifest", e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, IngestError> {
    serde_json::to_string_pretty(value).map_err(|e| IngestError::Io(e.into()))
}

fn check_extent(part: &str, found: f64, declared: f64) -> Result<(), IngestError> {
    if (found - declared).abs() > DURATION_TOLERANCE {
        return Err(IngestError::DurationMismatch { part: part.into(), found, declared });
    }
    Ok(())
}

fn validate_words(words: &[WordTiming]) -> Result<(), String> {
    for (i, w) in words.iter().enumerate() {
        if !(w.start >= 0.0 && w.start < w.end) {
            return Err(format!("word {i} `{}` has invalid span [{}, {}]", w.word, w.start, w.end));
        }
    }
    for (i, pair) in words.windows(2).enumerate() {
        if pair[1].start < pair[0].end {
            return Err(format!("word {} `{}` overlaps or precedes its predecessor", i + 1, pair[1].word));
        }
    }
    Ok(())
}

/// Parses `word<TAB>start<TAB>end` lines; blank lines are skipped.
pub fn parse_transcript(text: &str) -> Result<Vec<WordTiming>, String> {
    let mut words = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [word, start, end] = fields[..] else {
            return Err(format!("line {}: expected 3 tab-separated fields, got {}", n + 1, fields.len()));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("line {}: bad time `{s}`", n + 1))
        };
        words.push(WordTiming::new(word, parse(start)?, parse(end)?));
    }
    Ok(words)
}

pub fn format_transcript(words: &[WordTiming]) -> String {
    words
        .iter()
        .map(|w| format!("{}\t{}\t{}\n", w.word, w.start, w.end))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub video_id: String,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices_file: Option<String>,
}

/// Options for bundle loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    /// Used only when the manifest names a `video_file`.
    pub decoder: DecoderConfig,
}

fn existing(dir: &Path, part: &str, name: Option<&str>) -> Result<PathBuf, IngestError> {
    let name = name.ok_or_else(|| IngestError::MissingPart { part: part.into(), path: dir.to_path_buf() })?;
    let path = dir.join(name);
    if !path.exists() {
        return Err(IngestError::MissingPart { part: part.into(), path });
    }
    Ok(path)
}

fn read_text(path: &Path, part: &str) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| malformed(part, e.to_string()))
}

pub fn load_bundle(dir: &Path) -> Result<MediaBundle, IngestError> {
    load_bundle_with(dir, &LoadOptions { decoder: DecoderConfig::from_env() })
}

pub fn load_bundle_with(dir: &Path, options: &LoadOptions) -> Result<MediaBundle, IngestError> {
    let manifest_path = existing(dir, "manifest", Some(MANIFEST_FILE))?;
    let manifest: Manifest =
        toml::from_str(&read_text(&manifest_path, "manifest")?).map_err(|e| malformed("manifest", e.to_string()))?;
    let fps = manifest.fps.unwrap_or(1.0);
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(malformed("manifest", format!("fps must be positive, got {fps}")));
    }

    let transcript_path = existing(dir, "transcript", manifest.transcript_file.as_deref())?;
    let (frames, audio) = if let Some(video) = manifest.video_file.as_deref() {
        let video_path = existing(dir, "video", Some(video))?;
        decode_external(&video_path, fps, &options.decoder)?
    } else {
        let frames = if let Some(name) = manifest.frames_file.as_deref() {
            let path = existing(dir, "frames", Some(name))?;
            read_raw_frames(&path).map_err(|r| malformed("frames", r))?
        } else {
            let path = existing(dir, "frames", manifest.frames_dir.as_deref())?;
            read_png_dir(&path, fps).map_err(|r| malformed("frames", r))?
        };
        let audio_path = existing(dir, "audio", manifest.audio_file.as_deref())?;
        (frames, read_wav(&audio_path).map_err(|r| malformed("audio", r))?)
    };

    let mut words =
        parse_transcript(&read_text(&transcript_path, "transcript")?).map_err(|r| malformed("transcript", r))?;
    // aligners overshoot the audio end slightly; pull those ends back in
    for w in &mut words {
        if w.end > manifest.duration && w.end <= manifest.duration + DURATION_TOLERANCE {
            w.end = manifest.duration;
        }
    }

    let faces = match manifest.faces_file.as_deref() {
        Some(name) => {
            let path = existing(dir, "faces", Some(name))?;
            Some(serde_json::from_str(&read_text(&path, "faces")?).map_err(|e| malformed("faces", e.to_string()))?)
        }
        None => None,
    };
    let embeddings = match manifest.embeddings_file.as_deref() {
        Some(name) => {
            let path = existing(dir, "embeddings", Some(name))?;
            Some(
                EmbeddingDocument::parse(&read_text(&path, "embeddings")?)
                    .map_err(|e| malformed("embeddings", e.to_string()))?,
            )
        }
        None => None,
    };
    let matrices = match manifest.matrices_file.as_deref() {
        Some(name) => {
            let path = existing(dir, "matrices", Some(name))?;
            Some(
                MatrixDocument::parse(&read_text(&path, "matrices")?)
                    .map_err(|e| malformed("matrices", e.to_string()))?,
            )
        }
        None => None,
    };

    let bundle = MediaBundle {
        video_id: manifest.video_id,
        duration: manifest.duration,
        frames,
        audio,
        words,
        faces,
        embeddings,
        matrices,
    };
    bundle.validate()?;
    Ok(bundle)
}
