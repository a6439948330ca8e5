//! End-to-end analysis: bundle in, project out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::{
    self, BuiltinEmbedder, FileProvider, Embedding, EmbeddingError, EmbeddingModality, EmbeddingProvider,
    EmbeddingProviderConfig, ProviderKind,
};
use crate::grounding::{self, MatchingMatrix, MatrixKind, TemporalWeightConfig, DEFAULT_SPEECH_CONSTANT};
use crate::ingest::{load_bundle_with, LoadOptions, MediaBundle};
use crate::postprocess::{self, FilterConfig};
use crate::project::{MatrixSummary, Project, Provenance, PROJECT_FORMAT_VERSION};
use crate::segmentation::{self, AudioKind, AudioSegment, VisualSegment, DEFAULT_CONTENT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Segmentation,
    Embedding,
    Grounding,
    Postprocess,
    Project,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Segmentation => "segmentation",
            Stage::Embedding => "embedding",
            Stage::Grounding => "grounding",
            Stage::Postprocess => "postprocess",
            Stage::Project => "project",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    fn at(stage: Stage) -> impl FnOnce(Box<dyn std::error::Error + Send + Sync>) -> Self {
        move |source| Self { stage, source }
    }
}

fn stage<T, E: std::error::Error + Send + Sync + 'static>(stage: Stage, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::at(stage)(Box::new(e)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub provider: EmbeddingProviderConfig,
    pub content_threshold: f64,
    pub temporal: TemporalWeightConfig,
    pub speech_constant: f64,
    pub filters: FilterConfig,
    #[serde(skip)]
    pub load: LoadOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            provider: EmbeddingProviderConfig::default(),
            content_threshold: DEFAULT_CONTENT_THRESHOLD,
            temporal: TemporalWeightConfig::default(),
            speech_constant: DEFAULT_SPEECH_CONSTANT,
            filters: FilterConfig::default(),
            load: LoadOptions::default(),
        }
    }
}

impl AnalysisConfig {
    /// The settings a project was analyzed with. Re-running `analyze` on the
    /// recorded bundle path with these reproduces the unedited project.
    pub fn from_provenance(p: &Provenance) -> Self {
        Self {
            provider: EmbeddingProviderConfig {
                provider: p.provider,
                dim: p.dim,
                seed: p.seed,
                file_path: p.embeddings_file.as_ref().map(Into::into),
            },
            content_threshold: p.content_threshold,
            temporal: p.temporal,
            speech_constant: p.speech_constant,
            filters: p.filters,
            load: LoadOptions::default(),
        }
    }
}

/// Loads the bundle at `bundle_dir` and analyzes it.
pub fn analyze(bundle_dir: &Path, config: &AnalysisConfig) -> Result<Project, PipelineError> {
    let bundle = stage(Stage::Ingest, load_bundle_with(bundle_dir, &config.load))?;
    analyze_bundle(&bundle, &bundle_dir.to_string_lossy(), config)
}

fn provider_for(
    config: &EmbeddingProviderConfig,
    bundle: &MediaBundle,
    visual: &[VisualSegment],
    audio: &[AudioSegment],
) -> Result<Box<dyn EmbeddingProvider>, EmbeddingError> {
    config.validate()?;
    let file = match config.provider {
        ProviderKind::Builtin => return Ok(Box::new(BuiltinEmbedder::new(config.dim, config.seed)?)),
        ProviderKind::File => match (&config.file_path, &bundle.embeddings) {
            (Some(path), _) => FileProvider::new(embedding::load_embedding_file(path)?),
            (None, Some(doc)) => FileProvider::from_document(doc)?,
            (None, None) => {
                return Err(EmbeddingError::InvalidConfig(
                    "file provider needs a file path or an embeddings file in the bundle".into(),
                ))
            }
        },
    };
    file.check_coverage(visual, audio)?;
    Ok(Box::new(file))
}

struct Embedded {
    visual: Vec<Embedding>,
    text: Vec<Option<Embedding>>,
    audio: Vec<Option<Embedding>>,
}

fn embed_all(
    provider: &dyn EmbeddingProvider,
    bundle: &MediaBundle,
    visual: &[VisualSegment],
    audio: &[AudioSegment],
) -> Result<Embedded, EmbeddingError> {
    let visual_emb = visual
        .iter()
        .map(|v| provider.embed_visual(v, &bundle.frames))
        .collect::<Result<Vec<_>, _>>()?;
    let mut text = Vec::with_capacity(audio.len());
    let mut sound = Vec::with_capacity(audio.len());
    for a in audio {
        match a.kind {
            AudioKind::Speech => {
                text.push(Some(provider.embed_text(&a.id, &embedding::remove_stop_words(&a.transcript))?));
                sound.push(None);
            }
            AudioKind::NonSpeech => {
                text.push(None);
                sound.push(Some(provider.embed_audio(a, &bundle.audio)?));
            }
            AudioKind::Pause => {
                text.push(None);
                sound.push(None);
            }
        }
    }
    Ok(Embedded { visual: visual_emb, text, audio: sound })
}

/// Analyzes an already loaded bundle. `bundle_path` is recorded in the
/// project's provenance.
pub fn analyze_bundle(bundle: &MediaBundle, bundle_path: &str, config: &AnalysisConfig) -> Result<Project, PipelineError> {
    stage(Stage::Ingest, bundle.validate())?;
    let visual = stage(
        Stage::Segmentation,
        segmentation::detect_shots(&bundle.frames, config.content_threshold, bundle.duration),
    )?;
    let audio = stage(Stage::Segmentation, segmentation::segment_audio(&bundle.words, bundle.duration))?;

    let mut warnings = Vec::new();
    let (visual_text, visual_audio, matrix_source) = match &bundle.matrices {
        Some(doc) => {
            let (vt, va) = stage(Stage::Grounding, doc.to_matrices(visual.len(), audio.len()))?;
            (vt, va, "matrix_sidecar")
        }
        None => {
            let provider = stage(Stage::Embedding, provider_for(&config.provider, bundle, &visual, &audio))?;
            let e = stage(Stage::Embedding, embed_all(provider.as_ref(), bundle, &visual, &audio))?;
            for emb in e.visual.iter().chain(e.text.iter().flatten()).chain(e.audio.iter().flatten()) {
                if emb.zero {
                    let what = match emb.modality {
                        EmbeddingModality::Visual => "visual",
                        EmbeddingModality::Text => "text",
                        EmbeddingModality::Audio => "audio",
                    };
                    warnings.push(format!("segment {} has no {what} signal; its matches count as 0", emb.segment_id));
                }
            }
            let vt = stage(Stage::Grounding, grounding::compute_matrix(&e.visual, &e.text, MatrixKind::VisualText))?;
            let va = stage(Stage::Grounding, grounding::compute_matrix(&e.visual, &e.audio, MatrixKind::VisualAudio))?;
            (vt, va, "embeddings")
        }
    };

    let scored = stage(
        Stage::Grounding,
        grounding::score_all(&visual_text, &visual_audio, &visual, &audio, &config.temporal, config.speech_constant),
    )?;

    stage(Stage::Postprocess, config.filters.validate())?;
    let (metrics, metric_warnings) =
        postprocess::compute_metrics(&visual, &audio, bundle.faces.as_ref(), &bundle.audio);
    warnings.extend(metric_warnings);
    let mut issues = postprocess::surface_issues(&scored, &audio, &metrics, &config.filters);
    postprocess::sort_issues(&mut issues, &scored);

    let provenance = Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        bundle_path: bundle_path.to_string(),
        provider: config.provider.provider,
        dim: config.provider.dim,
        seed: config.provider.seed,
        embeddings_file: config.provider.file_path.as_ref().map(|p| p.to_string_lossy().into_owned()),
        matrix_source: matrix_source.to_string(),
        content_threshold: config.content_threshold,
        temporal: config.temporal,
        speech_constant: config.speech_constant,
        stopwords_version: embedding::STOPWORDS_VERSION,
        filters: config.filters,
        warnings,
    };
    let project_id = project_id(&bundle.video_id, &provenance, &[&visual_text, &visual_audio]);
    Ok(Project {
        format_version: PROJECT_FORMAT_VERSION,
        project_id,
        video_id: bundle.video_id.clone(),
        duration: bundle.duration,
        matrices: [&visual_text, &visual_audio]
            .iter()
            .map(|m| MatrixSummary { kind: m.kind, rows: m.rows, cols: m.cols, checksum: m.checksum() })
            .collect(),
        visual_segments: visual,
        audio_segments: audio,
        scored,
        metrics,
        issues,
        annotations: Vec::new(),
        filter_config: config.filters,
        provenance,
        revision: 0,
    })
}

/// `<video_id>-<12 hex digits>` from the provenance and matrix checksums, so
/// the same bundle and settings always map to the same id.
fn project_id(video_id: &str, provenance: &Provenance, matrices: &[&MatchingMatrix]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(video_id.as_bytes());
    hasher.update(serde_json::to_vec(provenance).expect("provenance serializes"));
    for m in matrices {
        hasher.update(m.checksum().as_bytes());
    }
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    let slug: String = video_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{slug}-{hex}")
}
