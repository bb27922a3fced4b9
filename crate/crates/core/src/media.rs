//! Frames, videos and the on-disk raster formats.
//!
//! Three formats are read: binary PPM (`P6`), binary PGM (`P5`) and VCDF, a
//! raw little-endian float container used for exact numeric fixtures:
//!
//! ```text
//! "VCDF" | version u32 = 1 | H u32 | W u32 | C u32 | H*W*C f32 (row-major, channel-last)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Result, VcdError};

pub const VCDF_MAGIC: &[u8; 4] = b"VCDF";
pub const VCDF_VERSION: u32 = 1;

/// A raster image with samples in `[0, 1]`, row-major and channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(VcdError::Shape(format!(
                "frame dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(VcdError::Shape(format!(
                "frames have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(VcdError::Shape(format!(
                "{height}x{width}x{channels} frame needs {expected} samples, got {}",
                data.len()
            )));
        }
        if let Some((idx, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(VcdError::Value(format!(
                "sample {idx} is {v}, expected a finite value in [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds a frame from `f(y, x, c)`, clamping every sample into `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp_unit(f(y, x, c)));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.height, self.width, self.channels)
    }

    /// Circular shift: the sample at `(y, x)` moves to `(y + dy, x + dx)` modulo the frame size.
    pub fn circshift(&self, dx: i64, dy: i64) -> Frame {
        let (h, w, c) = (self.height as i64, self.width as i64, self.channels);
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..h {
            let sy = (y - dy).rem_euclid(h) as usize;
            for x in 0..w {
                let sx = (x - dx).rem_euclid(w) as usize;
                let base = (sy * self.width + sx) * c;
                data.extend_from_slice(&self.data[base..base + c]);
            }
        }
        Frame { data, ..*self }
    }

    /// Applies `f` to every sample and clamps the result into `[0, 1]`.
    pub fn map_clamped(&self, mut f: impl FnMut(f32) -> f32) -> Frame {
        let data = self.data.iter().map(|&v| clamp_unit(f(v))).collect();
        Frame { data, ..*self }
    }

    /// Bilinear resampling with half-pixel centers and edge clamping.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Result<Frame> {
        if height == self.height && width == self.width {
            return Ok(self.clone());
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let taps = |dst: usize, scale: f64, len: usize| {
            let src = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, src - i0 as f64)
        };
        Frame::from_fn(height, width, self.channels, |y, x, c| {
            let (y0, y1, fy) = taps(y, sy, self.height);
            let (x0, x1, fx) = taps(x, sx, self.width);
            let top = self.get(y0, x0, c) as f64 * (1.0 - fx) + self.get(y0, x1, c) as f64 * fx;
            let bottom = self.get(y1, x0, c) as f64 * (1.0 - fx) + self.get(y1, x1, c) as f64 * fx;
            (top * (1.0 - fy) + bottom * fy) as f32
        })
    }
}

#[inline]
fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// An ordered frame sequence. Indices are 1-based throughout the public API.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Vec<Frame>,
    cond_index: usize,
}

impl Video {
    pub fn new(frames: Vec<Frame>, cond_index: usize) -> Result<Self> {
        if frames.len() < 2 {
            return Err(VcdError::Arity(format!(
                "a video needs N >= 2 frames, got {}",
                frames.len()
            )));
        }
        let first = &frames[0];
        if let Some((idx, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
            return Err(VcdError::DimensionMismatch(format!(
                "frame {} is {} but frame 1 is {}",
                idx + 1,
                f.shape_string(),
                first.shape_string()
            )));
        }
        if cond_index == 0 || cond_index > frames.len() {
            return Err(VcdError::Domain(format!(
                "cond_index {cond_index} outside [1, {}]",
                frames.len()
            )));
        }
        Ok(Self { frames, cond_index })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn cond_index(&self) -> usize {
        self.cond_index
    }

    /// Frame `i`, 1-based.
    pub fn frame(&self, i: usize) -> Option<&Frame> {
        i.checked_sub(1).and_then(|k| self.frames.get(k))
    }

    pub fn cond_frame(&self) -> &Frame {
        &self.frames[self.cond_index - 1]
    }
}

/// Reads a PPM, PGM or VCDF file.
pub fn load_frame(path: impl AsRef<Path>, expected_channels: Option<usize>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| VcdError::io(path, e))?;
    let frame = decode_frame(&bytes)?;
    if let Some(expected) = expected_channels {
        if frame.channels() != expected {
            return Err(VcdError::Shape(format!(
                "{} has {} channels, expected {expected}",
                path.display(),
                frame.channels()
            )));
        }
    }
    Ok(frame)
}

/// Decodes an in-memory PPM/PGM/VCDF image.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    if bytes.starts_with(VCDF_MAGIC) {
        return decode_vcdf(bytes);
    }
    match bytes.get(..2) {
        Some(b"P6") => decode_pnm(bytes, 3),
        Some(b"P5") => decode_pnm(bytes, 1),
        _ => {
            let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
            Err(VcdError::Format(format!("unknown magic bytes {shown:?}")))
        }
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| VcdError::Corrupt(format!("VCDF header truncated reading {what}")))
}

fn decode_vcdf(bytes: &[u8]) -> Result<Frame> {
    let version = read_u32(bytes, 4, "version")?;
    if version != VCDF_VERSION {
        return Err(VcdError::Format(format!("unsupported VCDF version {version}")));
    }
    let h = read_u32(bytes, 8, "height")? as usize;
    let w = read_u32(bytes, 12, "width")? as usize;
    let c = read_u32(bytes, 16, "channels")? as usize;
    if h == 0 || w == 0 || (c != 1 && c != 3) {
        return Err(VcdError::Format(format!("invalid VCDF dimensions {h}x{w}x{c}")));
    }
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| VcdError::Format(format!("VCDF dimensions overflow: {h}x{w}x{c}")))?;
    let payload = &bytes[20..];
    if payload.len() != count * 4 {
        return Err(VcdError::Corrupt(format!(
            "VCDF payload holds {} bytes, header declares {}",
            payload.len(),
            count * 4
        )));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
        return Err(VcdError::Value(format!("non-finite VCDF sample at index {idx}")));
    }
    Frame::new(h, w, c, data)
}

/// Header tokenizer for netpbm files: whitespace separated, `#` comments to end of line.
struct PnmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmHeader<'_> {
    fn next_uint(&mut self, what: &str) -> Result<usize> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|b| *b != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(VcdError::Corrupt(format!("header truncated before {what}"))),
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| VcdError::Format(format!("malformed {what} in header")))
    }
}

fn decode_pnm(bytes: &[u8], channels: usize) -> Result<Frame> {
    let mut header = PnmHeader { bytes, pos: 2 };
    let w = header.next_uint("width")?;
    let h = header.next_uint("height")?;
    let maxval = header.next_uint("maxval")?;
    if w == 0 || h == 0 {
        return Err(VcdError::Format(format!("invalid image size {w}x{h}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(VcdError::Format(format!(
            "only 8-bit samples are supported, maxval is {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(VcdError::Corrupt("header truncated after maxval".into())),
    }
    let payload = &bytes[header.pos + 1..];
    let count = h * w * channels;
    if payload.len() < count {
        return Err(VcdError::Corrupt(format!(
            "raster holds {} samples, header declares {count}",
            payload.len()
        )));
    }
    let scale = maxval as f32;
    let data = payload[..count]
        .iter()
        .map(|&v| (v as f32 / scale).min(1.0))
        .collect();
    Frame::new(h, w, channels, data)
}

pub fn encode_vcdf(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + frame.data.len() * 4);
    out.extend_from_slice(VCDF_MAGIC);
    for v in [
        VCDF_VERSION,
        frame.height as u32,
        frame.width as u32,
        frame.channels as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &frame.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Encodes as `P6`/`P5`, rounding samples to 8 bits.
pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.data.iter().map(|v| (v * 255.0).round() as u8));
    out
}

pub fn save_vcdf(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_vcdf(frame)).map_err(|e| VcdError::io(path, e))
}

pub fn save_pnm(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(frame)).map_err(|e| VcdError::io(path, e))
}

/// Loads frames in manifest order. Every frame must match the first frame's shape.
pub fn load_video<P: AsRef<Path>>(manifest: &[P], cond_index: usize) -> Result<Video> {
    if manifest.len() < 2 {
        return Err(VcdError::Arity(format!(
            "a video needs N >= 2 frames, manifest lists {}",
            manifest.len()
        )));
    }
    let frames = manifest
        .iter()
        .map(|p| load_frame(p, None))
        .collect::<Result<Vec<_>>>()?;
    Video::new(frames, cond_index)
}

fn is_frame_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "pgm" | "vcdf"))
        .unwrap_or(false)
}

/// Turns a directory of frame files (sorted by name) or a text manifest
/// (one path per line, relative to the manifest) into an ordered path list.
pub fn resolve_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    if path.is_dir() {
        let mut entries = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| VcdError::io(path, e))? {
            let p = entry.map_err(|e| VcdError::io(path, e))?.path();
            if p.is_file() && is_frame_file(&p) {
                entries.push(p);
            }
        }
        entries.sort();
        return Ok(entries);
    }
    let text = fs::read_to_string(path).map_err(|e| VcdError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// Seeded uniform-noise texture on a 1/64 grid in `[28/64, 56/64]`.
///
/// Every sample is a multiple of 1/64, and `v + b` lands in `[0.5, 1]` for
/// a brightness offset `b` in `[1/16, 1/8]`, so the f32 sum rounds
/// identically for all samples and the offset stays spatially constant.
pub fn textured_frame(height: usize, width: usize, channels: usize, seed: u64) -> Result<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..height * width * channels)
        .map(|_| rng.random_range(28u8..=56) as f32 / 64.0)
        .collect();
    Frame::new(height, width, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ppm(w: usize, h: usize, fill: u8) -> Vec<u8> {
        let mut b = format!("P6\n{w} {h}\n255\n").into_bytes();
        b.extend(std::iter::repeat_n(fill, w * h * 3));
        b
    }

    #[test]
    fn p6_max_samples_map_to_one() {
        let f = decode_frame(&ppm(2, 2, 255)).unwrap();
        assert_eq!((f.height(), f.width(), f.channels()), (2, 2, 3));
        assert!(f.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pgm_with_comment() {
        let mut b = b"P5 # a comment\n3 1\n# another\n255\n".to_vec();
        b.extend([0u8, 51, 255]);
        let f = decode_frame(&b).unwrap();
        assert_eq!(f.channels(), 1);
        assert_eq!(f.data(), &[0.0, 0.2, 1.0]);
    }

    #[test]
    fn vcdf_single_sample() {
        let mut b = b"VCDF".to_vec();
        for v in [1u32, 1, 1, 1] {
            b.extend(v.to_le_bytes());
        }
        b.extend(0.5f32.to_le_bytes());
        let f = decode_frame(&b).unwrap();
        assert_eq!(f, Frame::filled(1, 1, 1, 0.5).unwrap());
    }

    #[test]
    fn unknown_magic_is_format_error() {
        let err = decode_frame(b"P7\n1 1\n255\n\0").unwrap_err();
        assert!(matches!(err, VcdError::Format(_)), "{err}");
    }

    #[test]
    fn truncated_files() {
        let mut b = ppm(2, 2, 7);
        b.pop();
        assert!(matches!(decode_frame(&b), Err(VcdError::Corrupt(_))));
        let mut v = encode_vcdf(&Frame::filled(2, 2, 1, 0.25).unwrap());
        v.truncate(v.len() - 2);
        assert!(matches!(decode_frame(&v), Err(VcdError::Corrupt(_))));
        assert!(matches!(decode_frame(b"VCDF\x01\0"), Err(VcdError::Corrupt(_))));
    }

    #[test]
    fn vcdf_rejects_non_finite_and_bad_version() {
        let mut b = encode_vcdf(&Frame::filled(1, 1, 1, 0.5).unwrap());
        let n = b.len();
        b[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_frame(&b), Err(VcdError::Value(_))));
        b[4] = 2;
        assert!(matches!(decode_frame(&b), Err(VcdError::Format(_))));
    }

    #[test]
    fn frame_rejects_out_of_range() {
        assert!(matches!(Frame::new(1, 1, 1, vec![1.5]), Err(VcdError::Value(_))));
        assert!(matches!(Frame::new(1, 1, 2, vec![0.0; 2]), Err(VcdError::Shape(_))));
        assert!(matches!(Frame::new(1, 2, 1, vec![0.0]), Err(VcdError::Shape(_))));
    }

    #[test]
    fn circshift_moves_content() {
        let f = Frame::new(1, 3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(f.circshift(1, 0).data(), &[0.3, 0.1, 0.2]);
        assert_eq!(f.circshift(-1, 0).data(), &[0.2, 0.3, 0.1]);
        assert_eq!(f.circshift(3, 5), f);
    }

    #[test]
    fn video_checks() {
        let a = Frame::filled(2, 2, 3, 0.0).unwrap();
        let b = Frame::filled(2, 3, 3, 0.0).unwrap();
        assert!(matches!(Video::new(vec![a.clone()], 1), Err(VcdError::Arity(_))));
        assert!(matches!(
            Video::new(vec![a.clone(), b], 1),
            Err(VcdError::DimensionMismatch(_))
        ));
        assert!(matches!(Video::new(vec![a.clone(), a.clone()], 3), Err(VcdError::Domain(_))));
        let v = Video::new(vec![a.clone(), a.clone(), a], 1).unwrap();
        assert_eq!(v.frame_count(), 3);
        assert!(v.frame(0).is_none() && v.frame(3).is_some());
    }

    #[test]
    fn bilinear_resize_constant_and_identity() {
        let f = Frame::filled(3, 5, 3, 0.75).unwrap();
        let r = f.resize_bilinear(7, 2).unwrap();
        assert_eq!((r.height(), r.width()), (7, 2));
        assert!(r.data().iter().all(|&v| (v - 0.75).abs() < 1e-6));
        assert_eq!(f.resize_bilinear(3, 5).unwrap(), f);
    }
}
