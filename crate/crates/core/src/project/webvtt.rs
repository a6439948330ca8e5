//! WebVTT writing and a strict reader used to check exports.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Cue {
    pub id: Option<String>,
    pub start: f64,
    pub end: f64,
    pub text: String,
}

pub fn format_timestamp(seconds: f64) -> String {
    let ms = (seconds.max(0.0) * 1000.0).round() as u64;
    format!(
        "{:02}:{:02}:{:02}.{:03}",
        ms / 3_600_000,
        (ms / 60_000) % 60,
        (ms / 1000) % 60,
        ms % 1000
    )
}

/// Escapes markup characters and drops blank lines (which would end a cue).
pub fn escape_cue_text(text: &str) -> String {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes a document. `note` becomes a `NOTE` block after the header.
pub fn write_document(note: Option<&str>, cues: &[Cue]) -> String {
    let mut out = String::from("WEBVTT\n");
    if let Some(note) = note {
        out.push_str("\nNOTE ");
        out.push_str(note);
        out.push('\n');
    }
    for cue in cues {
        out.push('\n');
        if let Some(id) = &cue.id {
            out.push_str(id);
            out.push('\n');
        }
        out.push_str(&format!("{} --> {}\n", format_timestamp(cue.start), format_timestamp(cue.end)));
        out.push_str(&escape_cue_text(&cue.text));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {reason}")]
pub struct WebVttError {
    pub line: usize,
    pub reason: String,
}

fn err(line: usize, reason: impl Into<String>) -> WebVttError {
    WebVttError { line, reason: reason.into() }
}

fn parse_timestamp(s: &str, line: usize) -> Result<f64, WebVttError> {
    let bad = || err(line, format!("bad timestamp `{s}`"));
    let (clock, frac) = s.split_once('.').ok_or_else(bad)?;
    if frac.len() != 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let parts: Vec<&str> = clock.split(':').collect();
    let (h, m, sec) = match parts[..] {
        [m, s] => ("0", m, s),
        [h, m, s] if h.len() >= 2 => (h, m, s),
        _ => return Err(bad()),
    };
    let two = |x: &str| x.len() == 2 && x.bytes().all(|b| b.is_ascii_digit());
    if !two(m) || !two(sec) || !h.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let (h, m, sec, ms): (u64, u64, u64, u64) =
        (h.parse().map_err(|_| bad())?, m.parse().unwrap(), sec.parse().unwrap(), frac.parse().unwrap());
    if m > 59 || sec > 59 {
        return Err(bad());
    }
    Ok((h * 3600 + m * 60 + sec) as f64 + ms as f64 / 1000.0)
}

/// Parses a document, rejecting anything outside the WebVTT file syntax:
/// bad signature, malformed timings, `-->` in payloads or notes, cues that
/// end before they start, and out-of-order cue start times.
pub fn parse_strict(text: &str) -> Result<Vec<Cue>, WebVttError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let first = lines.first().copied().unwrap_or_default();
    if !(first == "WEBVTT" || first.starts_with("WEBVTT ") || first.starts_with("WEBVTT\t")) {
        return Err(err(1, "missing WEBVTT signature"));
    }
    let mut i = 1;
    while i < lines.len() && !lines[i].is_empty() {
        if lines[i].contains("-->") {
            return Err(err(i + 1, "header line contains `-->`"));
        }
        i += 1;
    }

    let mut cues: Vec<Cue> = Vec::new();
    while i < lines.len() {
        if lines[i].is_empty() {
            i += 1;
            continue;
        }
        let block_start = i;
        let mut block = Vec::new();
        while i < lines.len() && !lines[i].is_empty() {
            block.push(lines[i]);
            i += 1;
        }
        if block[0] == "NOTE" || block[0].starts_with("NOTE ") || block[0].starts_with("NOTE\t") {
            if let Some(k) = block.iter().position(|l| l.contains("-->")) {
                return Err(err(block_start + k + 1, "NOTE contains `-->`"));
            }
            continue;
        }
        let (id, timing_idx) = if block[0].contains("-->") { (None, 0) } else { (Some(block[0].to_string()), 1) };
        let line_no = block_start + timing_idx + 1;
        let timing = block.get(timing_idx).ok_or_else(|| err(line_no, "cue without timing line"))?;
        let (lhs, rhs) = timing.split_once(" --> ").ok_or_else(|| err(line_no, "bad timing line"))?;
        let end_token = rhs.split([' ', '\t']).next().unwrap_or_default();
        let start = parse_timestamp(lhs.trim_start(), line_no)?;
        let end = parse_timestamp(end_token, line_no)?;
        if end <= start {
            return Err(err(line_no, "cue ends before it starts"));
        }
        if cues.last().is_some_and(|c| start < c.start) {
            return Err(err(line_no, "cue start times out of order"));
        }
        let payload = &block[timing_idx + 1..];
        if let Some(k) = payload.iter().position(|l| l.contains("-->")) {
            return Err(err(line_no + k + 1, "payload contains `-->`"));
        }
        cues.push(Cue { id, start, end, text: payload.join("\n") });
    }
    Ok(cues)
}
