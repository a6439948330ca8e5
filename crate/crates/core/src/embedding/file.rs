//! Precomputed embedding files.
//!
//! A file is either one section
//! `{"version":1, "modality":"visual", "dim":D, "records":[{"segment_id":..., "vector":[...]}]}`
//! or several: `{"version":1, "sections":[{"modality":..., "dim":..., "records":[...]}, ...]}`.
//! Vectors are stored unnormalized.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedding, EmbeddingError, EmbeddingModality, EmbeddingProvider};
use crate::ingest::{AudioTrack, FrameSeries};
use crate::segmentation::{AudioKind, AudioSegment, VisualSegment};

pub const EMBEDDING_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub segment_id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSection {
    pub modality: EmbeddingModality,
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDocument {
    pub version: u32,
    pub sections: Vec<EmbeddingSection>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDocument {
    Multi { version: u32, sections: Vec<EmbeddingSection> },
    Single { version: u32, #[serde(flatten)] section: EmbeddingSection },
}

impl EmbeddingDocument {
    pub fn parse(text: &str) -> Result<Self, EmbeddingError> {
        let raw: RawDocument =
            serde_json::from_str(text).map_err(|e| EmbeddingError::FormatError(e.to_string()))?;
        let doc = match raw {
            RawDocument::Multi { version, sections } => Self { version, sections },
            RawDocument::Single { version, section } => Self { version, sections: vec![section] },
        };
        if doc.version != EMBEDDING_FILE_VERSION {
            return Err(EmbeddingError::FormatError(format!("unsupported version {}", doc.version)));
        }
        Ok(doc)
    }

    /// Normalized embeddings for every record, checking dimensions.
    pub fn embeddings(&self) -> Result<Vec<Embedding>, EmbeddingError> {
        let dim = self.sections.first().map_or(0, |s| s.dim);
        let mut out = Vec::new();
        for section in &self.sections {
            for rec in &section.records {
                for (expected, found) in [(section.dim, rec.vector.len()), (dim, section.dim)] {
                    if expected != found {
                        return Err(EmbeddingError::DimensionMismatch {
                            segment_id: rec.segment_id.clone(),
                            expected,
                            found,
                        });
                    }
                }
                if rec.vector.iter().any(|x| !x.is_finite()) {
                    return Err(EmbeddingError::FormatError(format!(
                        "non-finite value in `{}`",
                        rec.segment_id
                    )));
                }
                out.push(Embedding::normalized(&rec.segment_id, section.modality, rec.vector.clone()));
            }
        }
        Ok(out)
    }
}

pub fn load_embedding_file(path: &Path) -> Result<Vec<Embedding>, EmbeddingError> {
    let text = std::fs::read_to_string(path).map_err(|e| EmbeddingError::FormatError(e.to_string()))?;
    EmbeddingDocument::parse(&text)?.embeddings()
}

/// Serves embeddings looked up by segment id.
#[derive(Debug, Clone, Default)]
pub struct FileProvider {
    by_key: BTreeMap<(EmbeddingModality, String), Embedding>,
}

impl FileProvider {
    pub fn new(embeddings: Vec<Embedding>) -> Self {
        let by_key = embeddings
            .into_iter()
            .map(|e| ((e.modality, e.segment_id.clone()), e))
            .collect();
        Self { by_key }
    }

    pub fn from_document(doc: &EmbeddingDocument) -> Result<Self, EmbeddingError> {
        Ok(Self::new(doc.embeddings()?))
    }

    /// Every visual segment needs a visual record, every speech segment a
    /// text record and every non-speech segment an audio record.
    pub fn check_coverage(&self, visual: &[VisualSegment], audio: &[AudioSegment]) -> Result<(), EmbeddingError> {
        let wanted = visual
            .iter()
            .map(|v| (EmbeddingModality::Visual, &v.id))
            .chain(audio.iter().filter_map(|a| match a.kind {
                AudioKind::Speech => Some((EmbeddingModality::Text, &a.id)),
                AudioKind::NonSpeech => Some((EmbeddingModality::Audio, &a.id)),
                AudioKind::Pause => None,
            }));
        let missing: Vec<String> = wanted
            .filter(|(m, id)| !self.by_key.contains_key(&(*m, (*id).clone())))
            .map(|(_, id)| id.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(EmbeddingError::MissingSegment(missing))
        }
    }

    fn get(&self, modality: EmbeddingModality, id: &str) -> Result<Embedding, EmbeddingError> {
        self.by_key
            .get(&(modality, id.to_string()))
            .cloned()
            .ok_or_else(|| EmbeddingError::MissingSegment(vec![id.to_string()]))
    }
}

impl EmbeddingProvider for FileProvider {
    fn embed_visual(&self, segment: &VisualSegment, _frames: &FrameSeries) -> Result<Embedding, EmbeddingError> {
        self.get(EmbeddingModality::Visual, &segment.id)
    }

    fn embed_text(&self, segment_id: &str, _transcript: &str) -> Result<Embedding, EmbeddingError> {
        self.get(EmbeddingModality::Text, segment_id)
    }

    fn embed_audio(&self, segment: &AudioSegment, _audio: &AudioTrack) -> Result<Embedding, EmbeddingError> {
        if segment.kind != AudioKind::NonSpeech {
            return Err(EmbeddingError::WrongKind(segment.id.clone()));
        }
        self.get(EmbeddingModality::Audio, &segment.id)
    }
}
