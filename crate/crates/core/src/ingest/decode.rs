//! External decoder contract.
//!
//! The decoder is any program driven by a command template. Placeholders in
//! the template are substituted per argument:
//!
//! | placeholder    | value                                          |
//! |----------------|------------------------------------------------|
//! | `{input}`      | source video path                              |
//! | `{frames}`     | output frame pattern (`<dir>/frame_%06d.png`)  |
//! | `{frames_dir}` | output frame directory                         |
//! | `{fps}`        | sampling rate in frames per second             |
//! | `{audio}`      | output WAV path                                |
//! | `{rate}`       | requested audio sample rate in Hz              |
//!
//! Exit status 0 means success. An ffmpeg-based template looks like
//! `sh -c 'ffmpeg -loglevel error -i {input} -vf fps={fps} {frames} -ac 1 -ar {rate} -c:a pcm_s16le {audio}'`.

use std::path::Path;
use std::process::Command;

use super::audio::{read_wav, AudioTrack, DEFAULT_SAMPLE_RATE};
use super::frames::{read_png_dir, FrameSeries};
use super::IngestError;

/// Environment variable holding the decoder command template.
pub const DECODER_ENV: &str = "XA11Y_DECODER";

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    pub template: Option<String>,
    pub sample_rate: u32,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { template: None, sample_rate: DEFAULT_SAMPLE_RATE }
    }
}

impl DecoderConfig {
    /// Template taken from `XA11Y_DECODER`, if set.
    pub fn from_env() -> Self {
        Self {
            template: std::env::var(DECODER_ENV).ok().filter(|t| !t.trim().is_empty()),
            ..Self::default()
        }
    }
}

/// Runs the configured decoder and loads what it wrote.
pub fn decode_external(
    video_path: &Path,
    fps: f64,
    config: &DecoderConfig,
) -> Result<(FrameSeries, AudioTrack), IngestError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(IngestError::InvalidParameter(format!("fps must be positive, got {fps}")));
    }
    let template = config
        .template
        .as_deref()
        .ok_or_else(|| IngestError::DecoderUnavailable(format!("{DECODER_ENV} is not set")))?;
    let args = shell_words::split(template)
        .map_err(|e| IngestError::DecoderUnavailable(format!("bad decoder template: {e}")))?;
    if args.is_empty() {
        return Err(IngestError::DecoderUnavailable("empty decoder template".into()));
    }

    let scratch = tempfile::Builder::new().prefix("xa11y-decode-").tempdir()?;
    let frames_dir = scratch.path().join("frames");
    std::fs::create_dir(&frames_dir)?;
    let audio_path = scratch.path().join("audio.wav");
    let substitute = |arg: &str| {
        arg.replace("{input}", &video_path.to_string_lossy())
            .replace("{frames_dir}", &frames_dir.to_string_lossy())
            .replace("{frames}", &frames_dir.join("frame_%06d.png").to_string_lossy())
            .replace("{fps}", &fps.to_string())
            .replace("{audio}", &audio_path.to_string_lossy())
            .replace("{rate}", &config.sample_rate.to_string())
    };
    let argv: Vec<String> = args.iter().map(|a| substitute(a)).collect();

    let output = Command::new(&argv[0])
        .args(&argv[1..])
        .output()
        .map_err(|e| IngestError::DecoderUnavailable(format!("{}: {e}", argv[0])))?;
    if !output.status.success() {
        return Err(IngestError::DecodeFailed {
            status: output.status.code(),
            diagnostics: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }

    let frames = read_png_dir(&frames_dir, fps).map_err(|reason| IngestError::DecodeFailed {
        status: Some(0),
        diagnostics: format!("decoder frames unreadable: {reason}"),
    })?;
    let audio = read_wav(&audio_path).map_err(|reason| IngestError::DecodeFailed {
        status: Some(0),
        diagnostics: format!("decoder audio unreadable: {reason}"),
    })?;
    Ok((frames, audio.resampled(config.sample_rate)))
}
