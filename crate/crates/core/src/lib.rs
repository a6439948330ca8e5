//! Cross-modal accessibility analysis for video.
//!
//! A video is split into shots and speech / non-speech / pause audio spans.
//! Every shot is scored by how well the audio track (speech transcript or
//! non-speech sound) covers it, every non-speech span by how well the visuals
//! cover it. Low-scoring spans become issues an author can describe, caption,
//! or dismiss, and the authoring state exports to WebVTT and a preview
//! schedule.
//!
//! The pipeline stages live in their own modules:
//!
//! - [`ingest`]: media bundle loading and validation
//! - [`segmentation`]: shot detection and word-gap audio segmentation
//! - [`embedding`]: embedding providers (precomputed files, builtin test embedder)
//! - [`grounding`]: matching matrices and temporally weighted scores
//! - [`postprocess`]: presenter / silence filters and issue surfacing
//! - [`project`]: authoring state, lifecycle, persistence and exports
//! - [`eval`]: overlap-based precision / recall and baselines
//! - [`pipeline`]: the end-to-end `analyze` driver

pub mod embedding;
pub mod eval;
pub mod fixture;
pub mod grounding;
pub mod ingest;
pub mod pipeline;
pub mod postprocess;
pub mod project;
pub mod segmentation;

pub use ingest::MediaBundle;
pub use pipeline::{analyze, AnalysisConfig, PipelineError, Stage};
pub use project::Project;

/// Which track a segment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visual,
    Audio,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modality::Visual => f.write_str("visual"),
            Modality::Audio => f.write_str("audio"),
        }
    }
}
