//! Scoring instances and a loop-by-loop oracle for the grounding scores,
//! shared by the grounding tests and the acceptance harness.
#![allow(dead_code)]

use xa11y_core::grounding::{MatchingMatrix, MatrixKind};
use xa11y_core::segmentation::{AudioKind, AudioSegment, VisualSegment};

/// A scoring problem: shots and audio spans on a timeline plus raw cells.
#[derive(Debug, Clone)]
pub struct Instance {
    pub visual: Vec<(f64, f64)>,
    pub audio: Vec<(f64, f64, AudioKind)>,
    pub raw_vt: Vec<Vec<f64>>,
    pub raw_va: Vec<Vec<f64>>,
}

impl Instance {
    pub fn visual_segments(&self) -> Vec<VisualSegment> {
        self.visual
            .iter()
            .enumerate()
            .map(|(i, &(start, end))| VisualSegment { id: format!("v{i}"), index: i, start, end, representative_frames: vec![] })
            .collect()
    }

    pub fn audio_segments(&self) -> Vec<AudioSegment> {
        self.audio
            .iter()
            .enumerate()
            .map(|(j, &(start, end, kind))| AudioSegment {
                id: format!("a{j}"),
                index: j,
                start,
                end,
                kind,
                transcript: String::new(),
            })
            .collect()
    }

    /// Raw cells only where the column kind applies, as the pipeline builds them.
    pub fn matrices(&self) -> (MatchingMatrix, MatchingMatrix) {
        let masked = |raw: &Vec<Vec<f64>>, want: AudioKind| -> Vec<Vec<Option<f64>>> {
            raw.iter()
                .map(|row| row.iter().zip(&self.audio).map(|(x, a)| (a.2 == want).then_some(*x)).collect())
                .collect()
        };
        (
            MatchingMatrix::from_raw(MatrixKind::VisualText, masked(&self.raw_vt, AudioKind::Speech)),
            MatchingMatrix::from_raw(MatrixKind::VisualAudio, masked(&self.raw_va, AudioKind::NonSpeech)),
        )
    }
}

/// Direct transcription of the scoring rules with plain loops.
pub mod oracle {
    use super::*;

    pub fn normalize_cells(raw: &[Vec<f64>], audio: &[(f64, f64, AudioKind)], want: AudioKind) -> Vec<Vec<f64>> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in raw {
            for (j, x) in row.iter().enumerate() {
                if audio[j].2 == want {
                    lo = lo.min(*x);
                    hi = hi.max(*x);
                }
            }
        }
        let mut out = vec![vec![0.0; audio.len()]; raw.len()];
        for i in 0..raw.len() {
            for j in 0..audio.len() {
                if audio[j].2 == want {
                    out[i][j] = if hi > lo { (raw[i][j] - lo) / (hi - lo) } else { 0.5 };
                }
            }
        }
        out
    }

    fn mid(a: f64, b: f64) -> f64 {
        (a + b) / 2.0
    }

    /// (visual raw, audio raw, speech flags) before score normalization.
    pub fn raw_scores(inst: &Instance, w: f64) -> (Vec<f64>, Vec<f64>) {
        let vt = normalize_cells(&inst.raw_vt, &inst.audio, AudioKind::Speech);
        let va = normalize_cells(&inst.raw_va, &inst.audio, AudioKind::NonSpeech);
        let mut visual = Vec::new();
        for (i, v) in inst.visual.iter().enumerate() {
            let mut s = 0.0;
            for (j, a) in inst.audio.iter().enumerate() {
                let weight = w.powf((mid(v.0, v.1) - mid(a.0, a.1)).abs() / 5.0);
                match a.2 {
                    AudioKind::Speech => s += weight * vt[i][j],
                    AudioKind::NonSpeech => s += weight * va[i][j],
                    AudioKind::Pause => {}
                }
            }
            visual.push(s);
        }
        let mut audio = Vec::new();
        for (j, a) in inst.audio.iter().enumerate() {
            let s = match a.2 {
                AudioKind::Speech => 1.0,
                AudioKind::Pause => 0.0,
                AudioKind::NonSpeech => {
                    let mut s = 0.0;
                    for (i, v) in inst.visual.iter().enumerate() {
                        s += w.powf((mid(v.0, v.1) - mid(a.0, a.1)).abs() / 5.0) * va[i][j];
                    }
                    s
                }
            };
            audio.push(s);
        }
        (visual, audio)
    }

    pub fn minmax(xs: &[f64]) -> Vec<f64> {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        xs.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 }).collect()
    }

    pub fn scores(inst: &Instance, w: f64) -> (Vec<f64>, Vec<f64>) {
        let (v, a) = raw_scores(inst, w);
        let vn = minmax(&v);
        let pool: Vec<f64> = a.iter().zip(&inst.audio).filter(|(_, s)| s.2 != AudioKind::Speech).map(|(x, _)| *x).collect();
        let pn = minmax(&pool);
        let mut it = pn.into_iter();
        let an = inst
            .audio
            .iter()
            .map(|s| if s.2 == AudioKind::Speech { 1.0 } else { it.next().unwrap() })
            .collect();
        (vn, an)
    }
}

pub fn tiling(lengths: Vec<f64>) -> Vec<(f64, f64)> {
    let mut t = 0.0;
    lengths
        .into_iter()
        .map(|l| {
            let s = (t, t + l);
            t += l;
            s
        })
        .collect()
}

