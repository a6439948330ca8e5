//! Timeline colours.
//!
//! Unresolved segments blend from gray (accessible) to red (inaccessible) in
//! linear light; addressed and dismissed segments use fixed colours.

use crate::postprocess::IssueStatus;

pub const ACCESSIBLE_GRAY: [u8; 3] = [128, 128, 128];
pub const INACCESSIBLE_RED: [u8; 3] = [220, 38, 38];
pub const ADDRESSED_BLUE: [u8; 3] = [59, 130, 246];
pub const DISMISSED_GRAY: [u8; 3] = [75, 85, 99];

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("score {0} outside [0, 1]")]
pub struct ScoreOutOfRange(pub f64);

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(l: f64) -> u8 {
    let c = if l <= 0.003_130_8 { 12.92 * l } else { 1.055 * l.powf(1.0 / 2.4) - 0.055 };
    (c * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn score_to_color(score: f64, status: Option<IssueStatus>) -> Result<[u8; 3], ScoreOutOfRange> {
    if !(0.0..=1.0).contains(&score) {
        return Err(ScoreOutOfRange(score));
    }
    Ok(match status {
        Some(IssueStatus::Addressed) => ADDRESSED_BLUE,
        Some(IssueStatus::Dismissed) => DISMISSED_GRAY,
        _ => {
            let red_weight = 1.0 - score;
            let mut out = [0u8; 3];
            for (k, o) in out.iter_mut().enumerate() {
                let g = srgb_to_linear(ACCESSIBLE_GRAY[k]);
                let r = srgb_to_linear(INACCESSIBLE_RED[k]);
                *o = linear_to_srgb((1.0 - red_weight) * g + red_weight * r);
            }
            out
        }
    })
}

pub fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}
