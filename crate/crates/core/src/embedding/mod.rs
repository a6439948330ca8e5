//! Segment embeddings in a shared vector space.
//!
//! Two providers sit behind [`EmbeddingProvider`]: [`FileProvider`] replays
//! vectors computed offline by real joint-embedding models, and
//! [`BuiltinEmbedder`] is a small deterministic embedder for hermetic runs.

mod builtin;
mod file;

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{hash_token, BuiltinEmbedder, Projection, AUDIO_BANDS, HSV_BINS_PER_CHANNEL};
pub use file::{load_embedding_file, EmbeddingDocument, EmbeddingRecord, EmbeddingSection, FileProvider};

use crate::ingest::{AudioTrack, FrameSeries};
use crate::segmentation::{AudioSegment, VisualSegment};

pub const STOPWORDS_VERSION: u32 = 1;
const STOPWORDS_EN: &str = include_str!("stopwords_en.txt");

/// Norm below which a vector counts as "no signal".
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding file format error: {0}")]
    FormatError(String),
    #[error("dimension mismatch for `{segment_id}`: expected {expected}, found {found}")]
    DimensionMismatch { segment_id: String, expected: usize, found: usize },
    #[error("no embedding for segments: {}", .0.join(", "))]
    MissingSegment(Vec<String>),
    #[error("segment `{0}` has no representative frames")]
    NoFrames(String),
    #[error("segment `{0}` is not a non-speech segment")]
    WrongKind(String),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingModality {
    Visual,
    Text,
    Audio,
}

/// A unit vector, or a zero vector flagged as carrying no signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub segment_id: String,
    pub modality: EmbeddingModality,
    pub vector: Vec<f64>,
    pub zero: bool,
}

impl Embedding {
    /// L2-normalizes `raw`; a (near) zero vector is kept as zeros and flagged.
    pub fn normalized(segment_id: impl Into<String>, modality: EmbeddingModality, raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (vector, zero) = if norm < ZERO_NORM {
            (vec![0.0; raw.len()], true)
        } else {
            (raw.into_iter().map(|x| x / norm).collect(), false)
        };
        Self { segment_id: segment_id.into(), modality, vector, zero }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        dot(&self.vector, &other.vector)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    File,
    Builtin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingProviderConfig {
    pub provider: ProviderKind,
    pub dim: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_path: Option<PathBuf>,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        Self { provider: ProviderKind::Builtin, dim: 32, seed: 42, file_path: None }
    }
}

impl EmbeddingProviderConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 2 {
            return Err(EmbeddingError::InvalidConfig(format!("dim must be at least 2, got {}", self.dim)));
        }
        Ok(())
    }
}

/// Source of segment embeddings. Implementations are immutable once built.
pub trait EmbeddingProvider: Send + Sync {
    fn embed_visual(&self, segment: &VisualSegment, frames: &FrameSeries) -> Result<Embedding, EmbeddingError>;
    /// `transcript` is expected to be stop-word filtered already.
    fn embed_text(&self, segment_id: &str, transcript: &str) -> Result<Embedding, EmbeddingError>;
    fn embed_audio(&self, segment: &AudioSegment, audio: &AudioTrack) -> Result<Embedding, EmbeddingError>;
}

fn stop_words() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORDS_EN
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stop_word(token: &str) -> bool {
    stop_words().contains(token)
}

/// Lowercased tokens, split on anything that is not alphanumeric or an
/// in-word apostrophe.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn remove_stop_words(text: &str) -> String {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stop_word(t))
        .collect::<Vec<_>>()
        .join(" ")
}
