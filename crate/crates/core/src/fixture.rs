//! Deterministic synthetic demo video.
//!
//! Sixty seconds, five twelve-second shots, each planting one situation the
//! analysis should handle:
//!
//! | shot | span     | visuals                         | audio                                  |
//! |------|----------|---------------------------------|----------------------------------------|
//! | v0   | 0..12 s  | cream bowl on a wooden counter  | narration describing it                |
//! | v1   | 12..24 s | presenter talking to the camera | narration unrelated to the picture     |
//! | v2   | 24..36 s | pan slowly browning (hue drift) | narration that never mentions it       |
//! | v3   | 36..48 s | oven close-up, no speech        | off-screen 440 Hz kitchen timer tone   |
//! | v4   | 48..60 s | plated cake                     | narration describing it, then silence  |
//!
//! Expected outcome with the builtin embedder at seed 42: v2 and the timer
//! tone are open issues, v1 is suppressed by the presenter filter, and the
//! trailing silence (and the short pauses between narration blocks) are
//! suppressed by the silence filter.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::EvalLabel;
use crate::ingest::{
    AudioTrack, FaceBox, FaceEntry, FaceSidecar, FrameSeries, HsvFrame, IngestError, MediaBundle, WordTiming,
};
use crate::Modality;

pub const FIXTURE_VIDEO_ID: &str = "demo-cooking-60s";
pub const LABELS_FILE: &str = "labels.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub start: f64,
    pub end: f64,
    pub background: [u8; 3],
    /// Background colour reached by the last frame; frames in between blend
    /// linearly.
    pub background_end: Option<[u8; 3]>,
    pub accent: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechPlan {
    pub start: f64,
    pub end: f64,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixturePlan {
    pub video_id: String,
    pub duration: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub sample_rate: u32,
    pub shots: Vec<ShotPlan>,
    pub speech: Vec<SpeechPlan>,
    /// (start, end, frequency Hz, amplitude)
    pub tone: (f64, f64, f64, f64),
    /// Span with one face box per second, in a 1280x720 reference frame.
    pub presenter: (f64, f64),
    pub face_box: FaceBox,
    pub room_noise: f64,
    pub voice_amplitude: f64,
    pub noise_seed: u64,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

impl Default for FixturePlan {
    fn default() -> Self {
        let shot = |start: f64, background, background_end, accent| ShotPlan {
            start,
            end: start + 12.0,
            background,
            background_end,
            accent,
        };
        Self {
            video_id: FIXTURE_VIDEO_ID.to_string(),
            duration: 60.0,
            fps: 1.0,
            width: 64,
            height: 36,
            sample_rate: 16_000,
            shots: vec![
                shot(0.0, [150, 104, 62], None, [240, 228, 196]),
                shot(12.0, [70, 92, 128], None, [224, 172, 140]),
                shot(24.0, [228, 176, 96], Some([150, 86, 40]), [40, 40, 44]),
                shot(36.0, [34, 36, 40], None, [250, 120, 30]),
                shot(48.0, [236, 236, 230], None, [120, 70, 150]),
            ],
            speech: vec![
                SpeechPlan { start: 0.0, end: 11.4, words: words("whisk stir fold combine smooth spatula") },
                SpeechPlan { start: 12.0, end: 23.4, words: words("today share recipe subscribe") },
                SpeechPlan { start: 24.0, end: 35.4, words: words("trust secret always most") },
                SpeechPlan { start: 48.0, end: 54.0, words: words("fresh dessert garnish topping") },
            ],
            tone: (36.0, 48.0, 440.0, 0.25),
            presenter: (12.0, 24.0),
            face_box: FaceBox { x: 490.0, y: 160.0, w: 300.0, h: 250.0 },
            room_noise: 0.002,
            voice_amplitude: 0.12,
            noise_seed: 7,
        }
    }
}

fn blend(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (a[k] as f64 + (b[k] as f64 - a[k] as f64) * t).round() as u8;
    }
    out
}

/// Background with a centred accent rectangle covering the middle quarter.
fn raster(width: u32, height: u32, background: [u8; 3], accent: [u8; 3]) -> HsvFrame {
    let (w, h) = (width as usize, height as usize);
    let mut rgb = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let inside = x >= w / 4 && x < 3 * w / 4 && y >= h / 4 && y < 3 * h / 4;
            rgb.extend_from_slice(if inside { &accent } else { &background });
        }
    }
    HsvFrame::from_rgb(width, height, &rgb).expect("buffer sized to the frame")
}

fn quantize(x: f64) -> f32 {
    ((x.clamp(-1.0, 1.0) * 32767.0).round() / 32768.0) as f32
}

/// Word timings spread evenly over a speech span with 0.1 s gaps.
pub fn word_timings(plan: &SpeechPlan) -> Vec<WordTiming> {
    let n = plan.words.len();
    let slot = (plan.end - plan.start) / n as f64;
    let round = |t: f64| (t * 1000.0).round() / 1000.0;
    plan.words
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let start = round(plan.start + k as f64 * slot);
            let end = if k + 1 == n { plan.end } else { round(plan.start + (k + 1) as f64 * slot - 0.1) };
            WordTiming::new(w.clone(), start, end)
        })
        .collect()
}

impl FixturePlan {
    pub fn frames(&self) -> FrameSeries {
        let n = (self.duration * self.fps).round() as usize;
        let rasters = (0..n)
            .map(|k| {
                let t = k as f64 / self.fps;
                let shot = self
                    .shots
                    .iter()
                    .find(|s| t >= s.start && t < s.end)
                    .unwrap_or_else(|| self.shots.last().expect("plan has shots"));
                let background = match shot.background_end {
                    Some(end) => {
                        let frames_in_shot = ((shot.end - shot.start) * self.fps).round().max(2.0);
                        let pos = ((t - shot.start) * self.fps).round() / (frames_in_shot - 1.0);
                        blend(shot.background, end, pos.min(1.0))
                    }
                    None => shot.background,
                };
                raster(self.width, self.height, background, shot.accent)
            })
            .collect();
        FrameSeries::from_rasters(self.fps, rasters).expect("uniform rasters")
    }

    pub fn words(&self) -> Vec<WordTiming> {
        self.speech.iter().flat_map(word_timings).collect()
    }

    /// Room noise everywhere, a voiced buzz under each word, and the tone.
    pub fn audio(&self) -> AudioTrack {
        let sr = self.sample_rate as f64;
        let n = (self.duration * sr).round() as usize;
        let words = self.words();
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        let (tone_start, tone_end, freq, amp) = self.tone;
        let mut next_word = 0;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / sr;
                let mut x = self.room_noise * rng.random_range(-1.0..1.0);
                while next_word < words.len() && words[next_word].end <= t {
                    next_word += 1;
                }
                if words.get(next_word).is_some_and(|w| t >= w.start) {
                    let phase = std::f64::consts::TAU * t;
                    x += self.voice_amplitude
                        * (0.6 * (140.0 * phase).sin() + 0.3 * (280.0 * phase).sin() + 0.1 * (560.0 * phase).sin());
                }
                if t >= tone_start && t < tone_end {
                    x += amp * (std::f64::consts::TAU * freq * t).sin();
                }
                quantize(x)
            })
            .collect();
        AudioTrack::new(self.sample_rate, samples).expect("samples clamped")
    }

    pub fn faces(&self) -> FaceSidecar {
        let (start, end) = self.presenter;
        let entries = (start.ceil() as usize..end.ceil() as usize)
            .map(|t| FaceEntry { t: t as f64, boxes: vec![self.face_box] })
            .collect();
        FaceSidecar { frame_width: 1280, frame_height: 720, entries }
    }

    pub fn bundle(&self) -> MediaBundle {
        MediaBundle {
            video_id: self.video_id.clone(),
            duration: self.duration,
            frames: self.frames(),
            audio: self.audio(),
            words: self.words(),
            faces: Some(self.faces()),
            embeddings: None,
            matrices: None,
        }
    }

    /// Hand labels for the planted problems: the browning pan and the timer.
    pub fn labels(&self) -> Vec<EvalLabel> {
        let mut labels = Vec::new();
        if let Some(shot) = self.shots.get(2) {
            labels.push(EvalLabel {
                modality: Modality::Visual,
                start: shot.start,
                end: shot.end,
                note: "pan browning on the stove is never mentioned".into(),
            });
        }
        labels.push(EvalLabel {
            modality: Modality::Audio,
            start: self.tone.0,
            end: self.tone.1,
            note: "kitchen timer beeping off screen".into(),
        });
        labels
    }
}

/// Writes the default demo bundle plus `labels.json` into `dir`.
pub fn write_fixture(dir: &Path) -> Result<(), IngestError> {
    let plan = FixturePlan::default();
    plan.bundle().write_to(dir)?;
    let labels = serde_json::json!({ "version": 1, "labels": plan.labels() });
    let text = serde_json::to_string_pretty(&labels).map_err(|e| IngestError::Io(e.into()))?;
    std::fs::write(dir.join(LABELS_FILE), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_timings_tile_the_span() {
        let plan = SpeechPlan { start: 0.0, end: 3.0, words: words("a b c") };
        let w = word_timings(&plan);
        assert_eq!(w.len(), 3);
        assert_eq!((w[0].start, w[2].end), (0.0, 3.0));
        assert!(w.windows(2).all(|p| p[1].start - p[0].end < 0.5 && p[1].start >= p[0].end));
    }

    #[test]
    fn faces_one_per_second() {
        let faces = FixturePlan::default().faces();
        assert_eq!(faces.entries.len(), 12);
        assert!(faces.validate().is_ok());
        assert_eq!(faces.entries[0].boxes[0].area(), 75_000.0);
    }
}
