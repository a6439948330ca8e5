use std::path::Path;

/// Default analysis sample rate.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono audio, samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl AudioTrack {
    pub fn new(sample_rate: u32, samples: Vec<f32>) -> Result<Self, String> {
        if sample_rate == 0 {
            return Err("sample_rate must be positive".into());
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(format!("sample {i} = {s} outside [-1, 1]"));
        }
        Ok(Self { sample_rate, samples })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples whose time falls in `[start, end)`.
    pub fn slice(&self, start: f64, end: f64) -> &[f32] {
        let sr = self.sample_rate as f64;
        let lo = ((start * sr).ceil().max(0.0) as usize).min(self.samples.len());
        let hi = ((end * sr).ceil().max(0.0) as usize).min(self.samples.len());
        &self.samples[lo..hi.max(lo)]
    }

    /// Linear-interpolation resample; identity when the rate already matches.
    pub fn resampled(&self, rate: u32) -> AudioTrack {
        if rate == self.sample_rate || self.samples.is_empty() {
            return AudioTrack { sample_rate: rate, samples: self.samples.clone() };
        }
        let ratio = self.sample_rate as f64 / rate as f64;
        let n_out = (self.samples.len() as f64 / ratio).round() as usize;
        let last = self.samples.len() - 1;
        let samples = (0..n_out)
            .map(|k| {
                let pos = k as f64 * ratio;
                let i = (pos.floor() as usize).min(last);
                let frac = (pos - i as f64) as f32;
                let next = self.samples[(i + 1).min(last)];
                self.samples[i] * (1.0 - frac) + next * frac
            })
            .collect();
        AudioTrack { sample_rate: rate, samples }
    }
}

/// Reads RIFF/WAVE. Integer PCM is scaled by `2^(bits-1)`; multichannel
/// input is averaged to mono per frame.
pub fn read_wav(path: &Path) -> Result<AudioTrack, String> {
    let mut reader = hound::WavReader::open(path).map_err(|e| e.to_string())?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?
        }
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
    };
    let samples = interleaved
        .chunks(channels)
        .map(|frame| (frame.iter().sum::<f32>() / frame.len() as f32).clamp(-1.0, 1.0))
        .collect();
    AudioTrack::new(spec.sample_rate, samples)
}

/// Writes 16-bit mono PCM.
pub fn write_wav(path: &Path, track: &AudioTrack) -> Result<(), String> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: track.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| e.to_string())?;
    for &s in &track.samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(q).map_err(|e| e.to_string())?;
    }
    w.finalize().map_err(|e| e.to_string())
}
