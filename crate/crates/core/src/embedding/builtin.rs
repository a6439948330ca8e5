//! Deterministic test embedder.
//!
//! Visual: 48-bin HSV histogram. Audio: 32 log band powers. Both go through a
//! seed-fixed random projection with orthonormal columns (rows when the
//! target is smaller than the feature). Text: signed feature hashing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Embedding, EmbeddingError, EmbeddingModality, EmbeddingProvider};
use crate::ingest::{AudioTrack, FrameSeries};
use crate::segmentation::{AudioKind, AudioSegment, VisualSegment};

pub const HSV_BINS_PER_CHANNEL: usize = 16;
pub const AUDIO_BANDS: usize = 32;
/// Band power reference for log compression (-40 dBFS).
const BAND_POWER_REF: f64 = 1e-4;

/// Dense `dim x features` matrix with orthonormal columns when
/// `dim >= features` (an isometry) and orthonormal rows otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub dim: usize,
    pub features: usize,
    rows: Vec<Vec<f64>>,
}

impl Projection {
    pub fn new(features: usize, dim: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut m: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..features).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        if dim >= features {
            // Gram-Schmidt over columns
            for c in 0..features {
                for p in 0..c {
                    let d: f64 = (0..dim).map(|r| m[r][c] * m[r][p]).sum();
                    for row in m.iter_mut() {
                        row[c] -= d * row[p];
                    }
                }
                let n = (0..dim).map(|r| m[r][c] * m[r][c]).sum::<f64>().sqrt();
                for row in m.iter_mut() {
                    row[c] /= n;
                }
            }
        } else {
            for r in 0..dim {
                for p in 0..r {
                    let d = super::dot(&m[r], &m[p]);
                    let prev = m[p].clone();
                    for (x, y) in m[r].iter_mut().zip(&prev) {
                        *x -= d * y;
                    }
                }
                let n = super::dot(&m[r], &m[r]).sqrt();
                m[r].iter_mut().for_each(|x| *x /= n);
            }
        }
        Self { dim, features, rows: m }
    }

    pub fn apply(&self, feature: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| super::dot(row, feature)).collect()
    }
}

/// Seeded 64-bit token hash (FNV-1a over the seed and token bytes, then a
/// splitmix64 finalizer).
pub fn hash_token(token: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[derive(Debug, Clone)]
pub struct BuiltinEmbedder {
    pub dim: usize,
    pub seed: u64,
    visual: Projection,
    audio: Projection,
}

impl BuiltinEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::InvalidConfig(format!("dim must be at least 2, got {dim}")));
        }
        Ok(Self {
            dim,
            seed,
            visual: Projection::new(3 * HSV_BINS_PER_CHANNEL, dim, seed, 1),
            audio: Projection::new(AUDIO_BANDS, dim, seed, 2),
        })
    }

    pub fn visual_projection(&self) -> &Projection {
        &self.visual
    }

    pub fn audio_projection(&self) -> &Projection {
        &self.audio
    }

    /// Per-channel 16-bin histograms averaged over the given frames.
    pub fn hsv_histogram(frames: &FrameSeries, indices: &[usize]) -> Vec<f64> {
        let bins = HSV_BINS_PER_CHANNEL;
        let mut hist = vec![0.0; 3 * bins];
        for &k in indices {
            let px = &frames.frames[k].pixels;
            let n = (px.width as f64) * (px.height as f64);
            let mut counts = vec![0u64; 3 * bins];
            for [h, s, v] in px.pixels() {
                counts[(h as usize * bins / 180).min(bins - 1)] += 1;
                counts[bins + s as usize * bins / 256] += 1;
                counts[2 * bins + v as usize * bins / 256] += 1;
            }
            for (acc, c) in hist.iter_mut().zip(&counts) {
                *acc += *c as f64 / n;
            }
        }
        let m = indices.len().max(1) as f64;
        hist.iter_mut().for_each(|x| *x /= m);
        hist
    }

    /// log1p-compressed power in 32 equal-width bands spanning 0..Nyquist.
    pub fn band_energies(samples: &[f32]) -> Vec<f64> {
        let n = samples.len();
        let mut bands = vec![0.0; AUDIO_BANDS];
        if n == 0 {
            return bands;
        }
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s as f64, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let half = n / 2 + 1;
        let n2 = (n as f64) * (n as f64);
        for (k, x) in buf.iter().take(half).enumerate() {
            let band = (k * AUDIO_BANDS / half).min(AUDIO_BANDS - 1);
            // one-sided power; DC and Nyquist bins are not doubled
            let weight = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            bands[band] += weight * x.norm_sqr() / n2;
        }
        bands.iter().map(|p| (p / BAND_POWER_REF).ln_1p()).collect()
    }

    pub fn text_feature(&self, transcript: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in transcript.split_whitespace() {
            let h = hash_token(&token.to_lowercase(), self.seed);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 32) & 1 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        }
        v
    }
}

impl EmbeddingProvider for BuiltinEmbedder {
    fn embed_visual(&self, segment: &VisualSegment, frames: &FrameSeries) -> Result<Embedding, EmbeddingError> {
        if segment.representative_frames.is_empty() {
            return Err(EmbeddingError::NoFrames(segment.id.clone()));
        }
        let feature = Self::hsv_histogram(frames, &segment.representative_frames);
        Ok(Embedding::normalized(&segment.id, EmbeddingModality::Visual, self.visual.apply(&feature)))
    }

    fn embed_text(&self, segment_id: &str, transcript: &str) -> Result<Embedding, EmbeddingError> {
        Ok(Embedding::normalized(segment_id, EmbeddingModality::Text, self.text_feature(transcript)))
    }

    fn embed_audio(&self, segment: &AudioSegment, audio: &AudioTrack) -> Result<Embedding, EmbeddingError> {
        if segment.kind != AudioKind::NonSpeech {
            return Err(EmbeddingError::WrongKind(segment.id.clone()));
        }
        let feature = Self::band_energies(audio.slice(segment.start, segment.end));
        Ok(Embedding::normalized(&segment.id, EmbeddingModality::Audio, self.audio.apply(&feature)))
    }
}
