//! Flat-buffer entry point for foreign callers.
//!
//! [`score_buffer`] takes frames as one contiguous `f32` buffer in
//! `(N, H, W, C)` order with the conditioning frame at index 0, plus
//! configuration text (see [`crate::config`]), and returns the report as
//! JSON. Failures never panic; they come back as
//! `{"error": "<message>", "kind": "<class>"}`.
//!
//! Besides the regular configuration keys the text may contain
//! `variant = vcd | amp_only | phase_only | vcd_l2 | vcd_feat`.

use serde_json::json;

use crate::config::ConfigBuilder;
use crate::media::{Frame, Video};
use crate::metrics::{Scorer, Variant, VcdReport};
use crate::report::to_json;
use crate::{Result, VcdError};

pub fn error_json(err: &VcdError) -> String {
    let mut s = serde_json::to_string_pretty(&json!({ "error": err.to_string(), "kind": err.kind() }))
        .expect("error serializes");
    s.push('\n');
    s
}

/// Splits `variant = ...` out of the configuration text.
fn parse_request(config_text: &str) -> Result<(Variant, ConfigBuilder)> {
    let mut variant = Variant::Vcd;
    let mut rest = String::new();
    for line in config_text.lines() {
        let body = line.split('#').next().unwrap_or("");
        match body.split_once('=') {
            Some((k, v)) if k.trim() == "variant" => variant = v.trim().parse()?,
            _ => {
                rest.push_str(line);
                rest.push('\n');
            }
        }
    }
    let mut builder = ConfigBuilder::new();
    builder.apply_text(&rest)?;
    Ok((variant, builder))
}

pub fn buffer_to_video(buffer: &[f32], shape: [usize; 4]) -> Result<Video> {
    let [n, h, w, c] = shape;
    let per_frame = h
        .checked_mul(w)
        .and_then(|x| x.checked_mul(c))
        .ok_or_else(|| VcdError::Shape("shape overflows".into()))?;
    if per_frame == 0 {
        return Err(VcdError::Shape(format!("empty frame shape {h}x{w}x{c}")));
    }
    if n.checked_mul(per_frame) != Some(buffer.len()) {
        return Err(VcdError::Shape(format!(
            "buffer holds {} values but shape ({n}, {h}, {w}, {c}) needs {}",
            buffer.len(),
            n.saturating_mul(per_frame)
        )));
    }
    let frames = buffer
        .chunks_exact(per_frame)
        .map(|chunk| Frame::new(h, w, c, chunk.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Video::new(frames, 1)
}

pub fn score_buffer_report(buffer: &[f32], shape: [usize; 4], config_text: &str) -> Result<VcdReport> {
    let (variant, builder) = parse_request(config_text)?;
    let cfg = builder.build()?;
    let video = buffer_to_video(buffer, shape)?;
    Scorer::new(&cfg)?.score_video(&video, None, variant)
}

/// Report JSON, or a structured error object.
pub fn score_buffer(buffer: &[f32], shape: [usize; 4], config_text: &str) -> String {
    match score_buffer_report(buffer, shape, config_text) {
        Ok(report) => to_json(&report),
        Err(e) => error_json(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{vcd_video, MetricConfig};
    use crate::report::from_json;

    fn buffer(n: usize, h: usize, w: usize, c: usize) -> Vec<f32> {
        (0..n * h * w * c).map(|k| ((k * 37 + k / 5) % 101) as f32 / 100.0).collect()
    }

    #[test]
    fn matches_library_report() {
        let buf = buffer(3, 5, 4, 3);
        let out = score_buffer(&buf, [3, 5, 4, 3], "");
        let video = buffer_to_video(&buf, [3, 5, 4, 3]).unwrap();
        let direct = vcd_video(&video, &MetricConfig::default()).unwrap();
        assert_eq!(from_json(&out).unwrap(), direct);
        assert_eq!(out, to_json(&direct));
    }

    #[test]
    fn variant_line() {
        let buf = buffer(2, 4, 4, 1);
        let out = score_buffer(&buf, [2, 4, 4, 1], "variant = phase_only # only phases\nprojections = 8\n");
        let r = from_json(&out).unwrap();
        assert_eq!(r.variant, Variant::PhaseOnly);
        assert_eq!(r.config.swd.num_projections, 8);
        assert!(r.frames.iter().all(|f| f.amp == 0.0));
    }

    fn error_of(out: &str) -> (String, String) {
        let v: serde_json::Value = serde_json::from_str(out).unwrap();
        (v["error"].as_str().unwrap().to_string(), v["kind"].as_str().unwrap().to_string())
    }

    #[test]
    fn structured_errors() {
        let buf = buffer(2, 4, 4, 1);
        let (msg, kind) = error_of(&score_buffer(&buf[1..], [2, 4, 4, 1], ""));
        assert_eq!(kind, "shape");
        assert!(msg.contains("needs 32"));
        let (_, kind) = error_of(&score_buffer(&buf[..16], [1, 4, 4, 1], ""));
        assert_eq!(kind, "arity");
        let (_, kind) = error_of(&score_buffer(&buf, [2, 4, 4, 1], "alpha = x"));
        assert_eq!(kind, "parse");
        let (_, kind) = error_of(&score_buffer(&buf, [2, 4, 4, 1], "variant = nope"));
        assert_eq!(kind, "parse");
        let mut bad = buf.clone();
        bad[3] = f32::NAN;
        let (_, kind) = error_of(&score_buffer(&bad, [2, 4, 4, 1], ""));
        assert_eq!(kind, "value");
        let (_, kind) = error_of(&score_buffer(&[], [0, 0, 4, 1], ""));
        assert_eq!(kind, "shape");
    }
}
