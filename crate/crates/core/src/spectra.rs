//! Per-channel 2D DFT of feature maps and the point clouds built from it.
//!
//! The forward transform is unnormalized:
//! `X[u, v] = sum_{y, x} s[y, x] * exp(-2 pi i (u y / H + v x / W))`.
//! Maps up to 64x64 use a direct separable DFT with exact quarter-turn
//! twiddles; larger maps go through an FFT.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::encoder::FeatureMap;
use crate::{Result, VcdError};

/// Largest side length handled by the direct transform.
pub const DIRECT_DFT_MAX_SIDE: usize = 64;

/// Default relative threshold below which a coefficient's phase is reported as 0.
pub const DEFAULT_PHASE_EPS_REL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    channels: usize,
    height: usize,
    width: usize,
    coeffs: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let plane = self.height * self.width;
        &self.coeffs[c * plane..(c + 1) * plane]
    }

    /// Coefficient `(u, v)` of channel `c`.
    pub fn at(&self, c: usize, u: usize, v: usize) -> Complex64 {
        self.coeffs[(c * self.height + u) * self.width + v]
    }
}

/// How coefficients are pooled into a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMode {
    /// One 1-d point per (channel, u, v).
    Scalar,
    /// One C-d point per (u, v).
    #[default]
    ChannelVector,
}

impl PoolingMode {
    pub fn name(self) -> &'static str {
        match self {
            PoolingMode::Scalar => "scalar",
            PoolingMode::ChannelVector => "channel_vector",
        }
    }
}

impl fmt::Display for PoolingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoolingMode {
    type Err = VcdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(PoolingMode::Scalar),
            "channel_vector" | "cvec" => Ok(PoolingMode::ChannelVector),
            other => Err(VcdError::Parse(format!("unknown pooling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudKind {
    Amplitude,
    Phase,
    /// Raw feature values, no transform.
    Feature,
}

/// `n` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    kind: CloudKind,
    dim: usize,
    points: Vec<f64>,
}

impl PointCloud {
    pub fn new(kind: CloudKind, dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(VcdError::Shape(format!(
                "{} values cannot form points of dimension {dim}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(VcdError::Value("point cloud holds a non-finite value".into()));
        }
        Ok(Self { kind, dim, points })
    }

    pub fn kind(&self) -> CloudKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }
}

/// `exp(-2 pi i k / n)` for `k` in `0..n`, exact at multiples of a quarter turn.
fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            if (4 * k) % n == 0 {
                match 4 * k / n {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, -1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, 1.0),
                }
            } else {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            }
        })
        .collect()
}

fn direct_dft_1d(input: &[Complex64], out: &mut [Complex64], tw: &[Complex64]) {
    let n = input.len();
    for (f, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, x) in input.iter().enumerate() {
            acc += x * tw[(f * t) % n];
        }
        *o = acc;
    }
}

fn transform(map: &FeatureMap, mut rows: impl FnMut(&mut [Complex64], usize), mut cols: impl FnMut(&mut [Complex64], usize)) -> ComplexSpectrum {
    let (c, h, w) = (map.channels(), map.height(), map.width());
    let mut coeffs: Vec<Complex64> = map.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for plane in coeffs.chunks_exact_mut(h * w) {
        for row in plane.chunks_exact_mut(w) {
            rows(row, w);
        }
        for x in 0..w {
            for y in 0..h {
                column[y] = plane[y * w + x];
            }
            cols(&mut column, h);
            for y in 0..h {
                plane[y * w + x] = column[y];
            }
        }
    }
    ComplexSpectrum {
        channels: c,
        height: h,
        width: w,
        coeffs,
    }
}

/// Direct separable DFT.
pub fn dft2_direct(map: &FeatureMap) -> ComplexSpectrum {
    let (tw_w, tw_h) = (twiddles(map.width()), twiddles(map.height()));
    let mut scratch = vec![Complex64::new(0.0, 0.0); map.width().max(map.height())];
    let mut scratch2 = scratch.clone();
    transform(
        map,
        |row, n| {
            scratch[..n].copy_from_slice(row);
            direct_dft_1d(&scratch[..n], row, &tw_w);
        },
        |col, n| {
            scratch2[..n].copy_from_slice(col);
            direct_dft_1d(&scratch2[..n], col, &tw_h);
        },
    )
}

/// FFT-backed DFT.
pub fn dft2_fft(map: &FeatureMap) -> ComplexSpectrum {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(map.width());
    let col_fft = planner.plan_fft_forward(map.height());
    transform(map, |row, _| row_fft.process(row), |col, _| col_fft.process(col))
}

/// Unnormalized per-channel 2D DFT.
pub fn dft2(map: &FeatureMap) -> ComplexSpectrum {
    if map.height() <= DIRECT_DFT_MAX_SIDE && map.width() <= DIRECT_DFT_MAX_SIDE {
        dft2_direct(map)
    } else {
        dft2_fft(map)
    }
}

fn pool(
    spectrum: &ComplexSpectrum,
    mode: PoolingMode,
    kind: CloudKind,
    value: impl Fn(usize, Complex64) -> f64,
) -> PointCloud {
    let plane = spectrum.height * spectrum.width;
    let c = spectrum.channels;
    let points = match mode {
        PoolingMode::Scalar => spectrum
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, z)| value(k / plane, *z))
            .collect(),
        PoolingMode::ChannelVector => {
            let mut pts = Vec::with_capacity(c * plane);
            for p in 0..plane {
                for ch in 0..c {
                    pts.push(value(ch, spectrum.coeffs[ch * plane + p]));
                }
            }
            pts
        }
    };
    let dim = match mode {
        PoolingMode::Scalar => 1,
        PoolingMode::ChannelVector => c,
    };
    PointCloud { kind, dim, points }
}

/// Magnitudes of all coefficients.
pub fn amplitude_points(spectrum: &ComplexSpectrum, mode: PoolingMode) -> PointCloud {
    pool(spectrum, mode, CloudKind::Amplitude, |_, z| z.norm())
}

/// `atan2(im, re)` mapped into `(-pi, pi]`; coefficients smaller than
/// `eps_rel` times their channel's largest magnitude get phase 0.
pub fn phase_points(spectrum: &ComplexSpectrum, mode: PoolingMode, eps_rel: f64) -> Result<PointCloud> {
    if !(eps_rel >= 0.0 && eps_rel.is_finite()) {
        return Err(VcdError::Config(format!("eps_rel must be finite and >= 0, got {eps_rel}")));
    }
    let thresholds: Vec<f64> = (0..spectrum.channels)
        .map(|c| eps_rel * spectrum.channel(c).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .collect();
    Ok(pool(spectrum, mode, CloudKind::Phase, |c, z| {
        if z.norm() < thresholds[c] {
            0.0
        } else {
            wrap_phase(z.im.atan2(z.re))
        }
    }))
}

#[inline]
fn wrap_phase(p: f64) -> f64 {
    // atan2 yields -pi for a negative real with a -0.0 imaginary part
    let p = if p <= -PI { p + 2.0 * PI } else { p };
    p + 0.0
}

/// Raw feature values pooled like spectral coefficients (no transform).
pub fn feature_points(map: &FeatureMap, mode: PoolingMode) -> PointCloud {
    let plane = map.height() * map.width();
    let c = map.channels();
    match mode {
        PoolingMode::Scalar => PointCloud {
            kind: CloudKind::Feature,
            dim: 1,
            points: map.data().to_vec(),
        },
        PoolingMode::ChannelVector => {
            let mut points = Vec::with_capacity(c * plane);
            for p in 0..plane {
                for ch in 0..c {
                    points.push(map.data()[ch * plane + p]);
                }
            }
            PointCloud {
                kind: CloudKind::Feature,
                dim: c,
                points,
            }
        }
    }
}
