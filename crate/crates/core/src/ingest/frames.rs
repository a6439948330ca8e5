//! HSV frame rasters and the frame containers the bundle loader produces.

use std::io::{Read, Write};
use std::path::Path;

/// One 8-bit HSV raster, row-major, three bytes per pixel.
///
/// Channels follow the common 8-bit convention: hue is degrees / 2 (0..180),
/// saturation and value span 0..=255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HsvFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl HsvFrame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, String> {
        let expected = width as usize * height as usize * 3;
        if width == 0 || height == 0 {
            return Err("frame has zero width or height".into());
        }
        if data.len() != expected {
            return Err(format!("frame buffer has {} bytes, expected {expected}", data.len()));
        }
        Ok(Self { width, height, data })
    }

    /// Builds a frame from interleaved 8-bit RGB.
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8]) -> Result<Self, String> {
        if rgb.len() != width as usize * height as usize * 3 {
            return Err(format!("rgb buffer has {} bytes for {width}x{height}", rgb.len()));
        }
        let data = rgb
            .chunks_exact(3)
            .flat_map(|p| rgb_to_hsv(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, data)
    }

    /// A frame filled with one RGB colour.
    pub fn solid(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let hsv = rgb_to_hsv(rgb[0], rgb[1], rgb[2]);
        let data = hsv.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, data }
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Interleaved RGB rendering of this frame.
    pub fn to_rgb(&self) -> Vec<u8> {
        self.pixels().flat_map(|p| hsv_to_rgb(p[0], p[1], p[2])).collect()
    }
}

/// 8-bit RGB to 8-bit HSV (hue halved so it fits a byte).
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (rf, gf, bf) = (r as f64, g as f64, b as f64);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let s = if max == 0.0 { 0.0 } else { 255.0 * delta / max };
    let mut h = if delta == 0.0 {
        0.0
    } else if max == rf {
        60.0 * (gf - bf) / delta
    } else if max == gf {
        120.0 + 60.0 * (bf - rf) / delta
    } else {
        240.0 + 60.0 * (rf - gf) / delta
    };
    if h < 0.0 {
        h += 360.0;
    }
    let h8 = (h / 2.0).round() as u32 % 180;
    [h8 as u8, s.round() as u8, max as u8]
}

pub fn hsv_to_rgb(h: u8, s: u8, v: u8) -> [u8; 3] {
    let h = (h as f64) * 2.0;
    let s = s as f64 / 255.0;
    let v = v as f64;
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        (r1 + m).round().clamp(0.0, 255.0) as u8,
        (g1 + m).round().clamp(0.0, 255.0) as u8,
        (b1 + m).round().clamp(0.0, 255.0) as u8,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub pixels: HsvFrame,
}

/// Frames sampled at a fixed analysis rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub fps: f64,
    pub frames: Vec<Frame>,
}

impl FrameSeries {
    /// Validates timestamps and dimensions.
    pub fn new(fps: f64, frames: Vec<Frame>) -> Result<Self, String> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(format!("fps must be positive, got {fps}"));
        }
        for pair in frames.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(format!(
                    "frame timestamps not strictly increasing at t={}",
                    pair[1].timestamp
                ));
            }
            if (pair[1].pixels.width, pair[1].pixels.height) != (pair[0].pixels.width, pair[0].pixels.height) {
                return Err(format!("frame at t={} has different dimensions", pair[1].timestamp));
            }
        }
        Ok(Self { fps, frames })
    }

    /// Frames at `k / fps` for each raster in order.
    pub fn from_rasters(fps: f64, rasters: Vec<HsvFrame>) -> Result<Self, String> {
        let frames = rasters
            .into_iter()
            .enumerate()
            .map(|(k, pixels)| Frame { timestamp: k as f64 / fps, pixels })
            .collect();
        Self::new(fps, frames)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// End of the time span the frames cover (last timestamp plus one period).
    pub fn covered_until(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.timestamp + 1.0 / self.fps)
    }
}

const RAW_MAGIC: &[u8; 4] = b"XHSV";
const RAW_VERSION: u32 = 1;

/// Writes frames in the lossless raw container (`frames_file` in a manifest).
///
/// Layout, little-endian: magic `XHSV`, u32 version, u32 width, u32 height,
/// u32 count, f64 fps, then per frame an f64 timestamp and `w*h*3` HSV bytes.
pub fn write_raw_frames(path: &Path, series: &FrameSeries) -> std::io::Result<()> {
    let (w, h) = series
        .frames
        .first()
        .map_or((0, 0), |f| (f.pixels.width, f.pixels.height));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(RAW_MAGIC)?;
    out.write_all(&RAW_VERSION.to_le_bytes())?;
    out.write_all(&w.to_le_bytes())?;
    out.write_all(&h.to_le_bytes())?;
    out.write_all(&(series.frames.len() as u32).to_le_bytes())?;
    out.write_all(&series.fps.to_le_bytes())?;
    for f in &series.frames {
        out.write_all(&f.timestamp.to_le_bytes())?;
        out.write_all(&f.pixels.data)?;
    }
    out.flush()
}

pub fn read_raw_frames(path: &Path) -> Result<FrameSeries, String> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| e.to_string())?;
    let mut cur = bytes.as_slice();
    let mut take = |n: usize| -> Result<&[u8], String> {
        if cur.len() < n {
            return Err("unexpected end of frame data".into());
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };
    if take(4)? != RAW_MAGIC {
        return Err("bad magic".into());
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != RAW_VERSION {
        return Err(format!("unsupported raw frame version {version}"));
    }
    let w = u32_at(take(4)?);
    let h = u32_at(take(4)?);
    let count = u32_at(take(4)?) as usize;
    let fps = f64_at(take(8)?);
    let frame_bytes = w as usize * h as usize * 3;
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let timestamp = f64_at(take(8)?);
        let pixels = HsvFrame::new(w, h, take(frame_bytes)?.to_vec())?;
        frames.push(Frame { timestamp, pixels });
    }
    if !cur.is_empty() {
        return Err(format!("{} trailing bytes after last frame", cur.len()));
    }
    FrameSeries::new(fps, frames)
}

/// Loads `frame_%06d.png` files from a directory, ordered by number.
pub fn read_png_dir(dir: &Path, fps: f64) -> Result<FrameSeries, String> {
    let mut numbered = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(num) = name.strip_prefix("frame_").and_then(|n| n.strip_suffix(".png")) {
            if let Ok(k) = num.parse::<u64>() {
                numbered.push((k, path));
            }
        }
    }
    numbered.sort();
    let mut rasters = Vec::with_capacity(numbered.len());
    for (_, path) in &numbered {
        let img = image::open(path)
            .map_err(|e| format!("{}: {e}", path.display()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        rasters.push(HsvFrame::from_rgb(w, h, img.as_raw())?);
    }
    FrameSeries::from_rasters(fps, rasters)
}

pub fn write_png(path: &Path, frame: &HsvFrame) -> Result<(), String> {
    let img = image::RgbImage::from_raw(frame.width, frame.height, frame.to_rgb())
        .ok_or("frame buffer size mismatch")?;
    img.save(path).map_err(|e| e.to_string())
}
