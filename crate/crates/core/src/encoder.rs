//! Feature encoders with named tap points.
//!
//! Three backbones are available:
//!
//! * `identity`: the frame itself, one tap (`input`).
//! * `random_conv`: two conv/relu blocks with a max-pool between them and
//!   coefficients drawn from a seeded generator (taps `relu1`, `relu2`).
//! * `vgg_shallow`: the VGG19 convolution stack up to `conv5_1`, tapped after
//!   the relu of the first convolution in each of the five blocks. Weights are
//!   read from a VCDW file.
//!
//! All convolutions use zero padding that preserves the spatial size; pooling
//! is 2x2 max with stride 2 in ceil mode.
//!
//! VCDW layout, little-endian:
//!
//! ```text
//! "VCDW" | version u32 = 1 | layer_count u32 |
//!   per layer: name_len u32 | name | out u32 | in u32 | kh u32 | kw u32 |
//!              out*in*kh*kw f32 kernel | out f32 bias
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::media::Frame;
use crate::{Result, VcdError};

pub const VCDW_MAGIC: &[u8; 4] = b"VCDW";
pub const VCDW_VERSION: u32 = 1;

/// Per-channel statistics used to standardize inputs of the VGG backbone.
pub const VGG_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const VGG_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// VGG19 convolutions through `conv5_1`: (name, out channels, in channels).
/// A 2x2 pool follows the last convolution of blocks 1 to 4.
pub const VGG19_LAYERS: [(&str, usize, usize); 13] = [
    ("conv1_1", 64, 3),
    ("conv1_2", 64, 64),
    ("conv2_1", 128, 64),
    ("conv2_2", 128, 128),
    ("conv3_1", 256, 128),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
    ("conv3_4", 256, 256),
    ("conv4_1", 512, 256),
    ("conv4_2", 512, 512),
    ("conv4_3", 512, 512),
    ("conv4_4", 512, 512),
    ("conv5_1", 512, 512),
];
const VGG19_POOL_AFTER: [&str; 4] = ["conv1_2", "conv2_2", "conv3_4", "conv4_4"];

const RANDOM_CONV_WIDTHS: [usize; 2] = [8, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Identity,
    RandomConv,
    VggShallow,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Identity => "identity",
            EncoderKind::RandomConv => "random_conv",
            EncoderKind::VggShallow => "vgg_shallow",
        }
    }

    pub fn default_taps(self) -> Vec<Tap> {
        match self {
            EncoderKind::Identity => vec![Tap::Input],
            EncoderKind::RandomConv => vec![Tap::Relu1, Tap::Relu2],
            EncoderKind::VggShallow => Tap::VGG.to_vec(),
        }
    }

    fn allows(self, tap: Tap) -> bool {
        match self {
            EncoderKind::Identity => tap == Tap::Input,
            EncoderKind::RandomConv => matches!(tap, Tap::Relu1 | Tap::Relu2),
            EncoderKind::VggShallow => Tap::VGG.contains(&tap),
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = VcdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(EncoderKind::Identity),
            "random_conv" | "random" => Ok(EncoderKind::RandomConv),
            "vgg_shallow" | "vgg" => Ok(EncoderKind::VggShallow),
            other => Err(VcdError::Parse(format!("unknown encoder kind {other:?}"))),
        }
    }
}

/// A named activation exposed by an encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tap {
    Input,
    Relu1,
    Relu2,
    #[serde(rename = "relu1_1")]
    Relu1_1,
    #[serde(rename = "relu2_1")]
    Relu2_1,
    #[serde(rename = "relu3_1")]
    Relu3_1,
    #[serde(rename = "relu4_1")]
    Relu4_1,
    #[serde(rename = "relu5_1")]
    Relu5_1,
}

impl Tap {
    pub const VGG: [Tap; 5] = [
        Tap::Relu1_1,
        Tap::Relu2_1,
        Tap::Relu3_1,
        Tap::Relu4_1,
        Tap::Relu5_1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tap::Input => "input",
            Tap::Relu1 => "relu1",
            Tap::Relu2 => "relu2",
            Tap::Relu1_1 => "relu1_1",
            Tap::Relu2_1 => "relu2_1",
            Tap::Relu3_1 => "relu3_1",
            Tap::Relu4_1 => "relu4_1",
            Tap::Relu5_1 => "relu5_1",
        }
    }

    /// The convolution whose relu output this tap exposes.
    fn vgg_layer(self) -> Option<&'static str> {
        match self {
            Tap::Relu1_1 => Some("conv1_1"),
            Tap::Relu2_1 => Some("conv2_1"),
            Tap::Relu3_1 => Some("conv3_1"),
            Tap::Relu4_1 => Some("conv4_1"),
            Tap::Relu5_1 => Some("conv5_1"),
            _ => None,
        }
    }
}

impl fmt::Display for Tap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tap {
    type Err = VcdError;

    fn from_str(s: &str) -> Result<Self> {
        let tap = match s.to_ascii_lowercase().as_str() {
            "input" => Tap::Input,
            "relu1" => Tap::Relu1,
            "relu2" => Tap::Relu2,
            "relu1_1" => Tap::Relu1_1,
            "relu2_1" => Tap::Relu2_1,
            "relu3_1" => Tap::Relu3_1,
            "relu4_1" => Tap::Relu4_1,
            "relu5_1" => Tap::Relu5_1,
            other => return Err(VcdError::Parse(format!("unknown tap {other:?}"))),
        };
        Ok(tap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub taps: Vec<Tap>,
    pub seed: Option<u64>,
    pub weights_path: Option<PathBuf>,
}

impl EncoderSpec {
    pub fn identity() -> Self {
        Self {
            kind: EncoderKind::Identity,
            taps: EncoderKind::Identity.default_taps(),
            seed: None,
            weights_path: None,
        }
    }

    pub fn random_conv(seed: u64) -> Self {
        Self {
            kind: EncoderKind::RandomConv,
            taps: EncoderKind::RandomConv.default_taps(),
            seed: Some(seed),
            weights_path: None,
        }
    }

    pub fn vgg_shallow(weights_path: impl Into<PathBuf>) -> Self {
        Self {
            kind: EncoderKind::VggShallow,
            taps: EncoderKind::VggShallow.default_taps(),
            seed: None,
            weights_path: Some(weights_path.into()),
        }
    }

    pub fn with_taps(mut self, taps: Vec<Tap>) -> Self {
        self.taps = taps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(VcdError::Config("encoder needs at least one tap".into()));
        }
        for (k, tap) in self.taps.iter().enumerate() {
            if !self.kind.allows(*tap) {
                return Err(VcdError::Config(format!(
                    "tap {tap} is not available on the {} encoder",
                    self.kind
                )));
            }
            if self.taps[..k].contains(tap) {
                return Err(VcdError::Config(format!("tap {tap} listed twice")));
            }
        }
        Ok(())
    }
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self::identity()
    }
}

/// One encoder output, stored channel-major (`c`, `y`, `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    tap: Tap,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(tap: Tap, channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(VcdError::Shape(format!(
                "feature map dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(VcdError::Shape(format!(
                "{channels}x{height}x{width} feature map needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(VcdError::Value("feature map holds a non-finite value".into()));
        }
        Ok(Self {
            tap,
            channels,
            height,
            width,
            data,
        })
    }

    /// Channel-major copy of a frame.
    pub fn from_frame(frame: &Frame, tap: Tap) -> Self {
        let (h, w, c) = (frame.height(), frame.width(), frame.channels());
        let mut data = vec![0.0; h * w * c];
        for (p, px) in frame.data().chunks_exact(c).enumerate() {
            for (ch, v) in px.iter().enumerate() {
                data[ch * h * w + p] = *v as f64;
            }
        }
        Self {
            tap,
            channels: c,
            height: h,
            width: w,
            data,
        }
    }

    pub fn tap(&self) -> Tap {
        self.tap
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_height: usize,
    pub kernel_width: usize,
    /// `out x in x kh x kw`, row-major.
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvLayer {
    fn check(&self) -> Result<()> {
        let dims = [
            self.out_channels,
            self.in_channels,
            self.kernel_height,
            self.kernel_width,
        ];
        if dims.contains(&0) {
            return Err(VcdError::IncompatibleWeights(format!(
                "layer {} has a zero dimension",
                self.name
            )));
        }
        if self.kernel.len() != dims.iter().product::<usize>() || self.bias.len() != self.out_channels {
            return Err(VcdError::IncompatibleWeights(format!(
                "layer {} coefficient counts do not match its shape",
                self.name
            )));
        }
        if self.kernel.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(VcdError::Value(format!(
                "layer {} holds a non-finite coefficient",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightBundle {
    pub layers: Vec<ConvLayer>,
}

impl WeightBundle {
    /// Finite coefficients and channel-compatible consecutive layers.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(VcdError::IncompatibleWeights("weight bundle has no layers".into()));
        }
        for layer in &self.layers {
            layer.check()?;
        }
        for pair in self.layers.windows(2) {
            if pair[1].in_channels != pair[0].out_channels {
                return Err(VcdError::IncompatibleWeights(format!(
                    "layer {} expects {} input channels but {} produces {}",
                    pair[1].name, pair[1].in_channels, pair[0].name, pair[0].out_channels
                )));
            }
        }
        Ok(())
    }

    /// Checks the bundle against the VGG19 table: a name- and shape-exact
    /// prefix of it reaching at least the deepest requested tap.
    pub fn validate_vgg(&self, taps: &[Tap]) -> Result<()> {
        if self.layers.len() > VGG19_LAYERS.len() {
            return Err(VcdError::IncompatibleWeights(format!(
                "{} layers exceed the {}-layer shallow VGG19 stack",
                self.layers.len(),
                VGG19_LAYERS.len()
            )));
        }
        for (layer, (name, out, inp)) in self.layers.iter().zip(VGG19_LAYERS) {
            let shape = (layer.out_channels, layer.in_channels, layer.kernel_height, layer.kernel_width);
            if layer.name != name || shape != (out, inp, 3, 3) {
                return Err(VcdError::IncompatibleWeights(format!(
                    "layer {} is {}x{}x{}x{}, architecture expects {name} as {out}x{inp}x3x3",
                    layer.name, shape.0, shape.1, shape.2, shape.3
                )));
            }
        }
        let needed = vgg_depth(taps);
        if self.layers.len() < needed {
            return Err(VcdError::IncompatibleWeights(format!(
                "taps need {needed} layers (through {}), bundle has {}",
                VGG19_LAYERS[needed - 1].0,
                self.layers.len()
            )));
        }
        Ok(())
    }

    /// He-initialized stand-in for the first `depth` VGG19 layers. It has the
    /// real architecture but no pretrained meaning; useful for tests and demos.
    pub fn synthetic_vgg(depth: usize, seed: u64) -> Result<Self> {
        if depth == 0 || depth > VGG19_LAYERS.len() {
            return Err(VcdError::Config(format!(
                "synthetic VGG depth must be in [1, {}]",
                VGG19_LAYERS.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = VGG19_LAYERS[..depth]
            .iter()
            .map(|&(name, out, inp)| {
                let scale = (2.0 / (inp * 9) as f64).sqrt();
                ConvLayer {
                    name: name.to_string(),
                    out_channels: out,
                    in_channels: inp,
                    kernel_height: 3,
                    kernel_width: 3,
                    kernel: (0..out * inp * 9)
                        .map(|_| (scale * rng.sample::<f64, _>(StandardNormal)) as f32)
                        .collect(),
                    bias: (0..out).map(|_| rng.random_range(-0.05f32..0.05)).collect(),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Depth [`synthetic_vgg`](Self::synthetic_vgg) needs for `taps`.
    pub fn vgg_depth(taps: &[Tap]) -> usize {
        vgg_depth(taps)
    }
}

/// Number of VGG19 layers required to reach the deepest of `taps`.
fn vgg_depth(taps: &[Tap]) -> usize {
    taps.iter()
        .filter_map(|t| t.vgg_layer())
        .filter_map(|name| VGG19_LAYERS.iter().position(|(n, _, _)| *n == name))
        .map(|k| k + 1)
        .max()
        .unwrap_or(0)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.bytes.len())
            .ok_or_else(|| VcdError::Corrupt(format!("VCDW truncated reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.saturating_mul(4), what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

/// Parses a VCDW byte stream and runs the generic bundle checks.
pub fn parse_weights(bytes: &[u8]) -> Result<WeightBundle> {
    if bytes.len() < 4 || &bytes[..4] != VCDW_MAGIC {
        return Err(VcdError::Format("missing VCDW magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != VCDW_VERSION as usize {
        return Err(VcdError::Format(format!("unsupported VCDW version {version}")));
    }
    let count = r.u32("layer count")?;
    let mut layers = Vec::with_capacity(count.min(64));
    for k in 0..count {
        let name_len = r.u32("layer name length")?;
        let name = String::from_utf8(r.take(name_len, "layer name")?.to_vec())
            .map_err(|_| VcdError::Format(format!("layer {k} name is not UTF-8")))?;
        let out_channels = r.u32("out channels")?;
        let in_channels = r.u32("in channels")?;
        let kernel_height = r.u32("kernel height")?;
        let kernel_width = r.u32("kernel width")?;
        let n = [out_channels, in_channels, kernel_height, kernel_width]
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .ok_or_else(|| VcdError::Corrupt(format!("layer {name} shape overflows")))?;
        let kernel = r.f32s(n, "kernel")?;
        let bias = r.f32s(out_channels, "bias")?;
        layers.push(ConvLayer {
            name,
            out_channels,
            in_channels,
            kernel_height,
            kernel_width,
            kernel,
            bias,
        });
    }
    if r.pos != bytes.len() {
        return Err(VcdError::Corrupt(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - r.pos
        )));
    }
    let bundle = WeightBundle { layers };
    bundle.validate()?;
    Ok(bundle)
}

pub fn encode_weights(bundle: &WeightBundle) -> Vec<u8> {
    let mut out = VCDW_MAGIC.to_vec();
    let put = |v: usize, out: &mut Vec<u8>| out.extend((v as u32).to_le_bytes());
    put(VCDW_VERSION as usize, &mut out);
    put(bundle.layers.len(), &mut out);
    for layer in &bundle.layers {
        put(layer.name.len(), &mut out);
        out.extend(layer.name.as_bytes());
        for d in [
            layer.out_channels,
            layer.in_channels,
            layer.kernel_height,
            layer.kernel_width,
        ] {
            put(d, &mut out);
        }
        for v in layer.kernel.iter().chain(&layer.bias) {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

/// Reads a VCDW file; for `vgg_shallow` specs the layers are also checked
/// against the VGG19 architecture table.
pub fn load_weights(path: impl AsRef<Path>, spec: &EncoderSpec) -> Result<WeightBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| VcdError::io(path, e))?;
    let bundle = parse_weights(&bytes)?;
    if spec.kind == EncoderKind::VggShallow {
        bundle.validate_vgg(&spec.taps)?;
    }
    Ok(bundle)
}

/// Activations flowing through a conv stack, channel-major.
#[derive(Clone)]
struct Tensor {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Conv {
    out_c: usize,
    in_c: usize,
    kh: usize,
    kw: usize,
    kernel: Vec<f64>,
    bias: Vec<f64>,
}

impl From<&ConvLayer> for Conv {
    fn from(l: &ConvLayer) -> Self {
        Self {
            out_c: l.out_channels,
            in_c: l.in_channels,
            kh: l.kernel_height,
            kw: l.kernel_width,
            kernel: l.kernel.iter().map(|&v| v as f64).collect(),
            bias: l.bias.iter().map(|&v| v as f64).collect(),
        }
    }
}

impl Conv {
    /// Same-size zero-padded convolution followed by relu.
    fn forward_relu(&self, x: &Tensor) -> Tensor {
        let (h, w) = (x.h, x.w);
        let plane = h * w;
        let (ph, pw) = (self.kh / 2, self.kw / 2);
        let mut data = vec![0.0; self.out_c * plane];
        data.par_chunks_mut(plane).enumerate().for_each(|(oc, out)| {
            out.fill(self.bias[oc]);
            for ic in 0..self.in_c {
                let src = &x.data[ic * plane..(ic + 1) * plane];
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let k = self.kernel[((oc * self.in_c + ic) * self.kh + ky) * self.kw + kx];
                        if k == 0.0 {
                            continue;
                        }
                        let dy = ky as isize - ph as isize;
                        let dx = kx as isize - pw as isize;
                        let y_lo = (-dy).max(0) as usize;
                        let y_hi = (h as isize - dy).min(h as isize).max(0) as usize;
                        let x_lo = (-dx).max(0) as usize;
                        let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                        if x_lo >= x_hi {
                            continue;
                        }
                        for y in y_lo..y_hi {
                            let sy = (y as isize + dy) as usize;
                            let o = &mut out[y * w + x_lo..y * w + x_hi];
                            let s = &src[sy * w + (x_lo as isize + dx) as usize..][..x_hi - x_lo];
                            for (o, s) in o.iter_mut().zip(s) {
                                *o += k * s;
                            }
                        }
                    }
                }
            }
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        });
        Tensor {
            c: self.out_c,
            h,
            w,
            data,
        }
    }
}

/// 2x2 max pool, stride 2, ceil mode.
fn max_pool(x: &Tensor) -> Tensor {
    let (oh, ow) = (x.h.div_ceil(2), x.w.div_ceil(2));
    let mut data = vec![f64::NEG_INFINITY; x.c * oh * ow];
    for c in 0..x.c {
        for y in 0..x.h {
            for xx in 0..x.w {
                let o = &mut data[(c * oh + y / 2) * ow + xx / 2];
                *o = o.max(x.data[(c * x.h + y) * x.w + xx]);
            }
        }
    }
    Tensor {
        c: x.c,
        h: oh,
        w: ow,
        data,
    }
}

#[derive(Debug, Clone)]
enum Op {
    ConvRelu(Conv),
    Pool,
    Emit(Tap),
}

#[derive(Debug, Clone)]
struct Net {
    in_channels: usize,
    ops: Vec<Op>,
}

impl Net {
    fn run(&self, input: Tensor, taps: &[Tap]) -> Vec<FeatureMap> {
        let mut found: Vec<Option<FeatureMap>> = vec![None; taps.len()];
        let mut remaining = taps.len();
        let mut x = input;
        for op in &self.ops {
            if remaining == 0 {
                break;
            }
            match op {
                Op::ConvRelu(conv) => x = conv.forward_relu(&x),
                Op::Pool => x = max_pool(&x),
                Op::Emit(tap) => {
                    if let Some(k) = taps.iter().position(|t| t == tap) {
                        found[k] = Some(FeatureMap {
                            tap: *tap,
                            channels: x.c,
                            height: x.h,
                            width: x.w,
                            data: x.data.clone(),
                        });
                        remaining -= 1;
                    }
                }
            }
        }
        found.into_iter().map(|m| m.expect("tap emitted")).collect()
    }

    fn shapes(&self, (mut c, mut h, mut w): (usize, usize, usize), taps: &[Tap]) -> Vec<(Tap, usize, usize, usize)> {
        let mut found = vec![None; taps.len()];
        for op in &self.ops {
            match op {
                Op::ConvRelu(conv) => c = conv.out_c,
                Op::Pool => (h, w) = (h.div_ceil(2), w.div_ceil(2)),
                Op::Emit(tap) => {
                    if let Some(k) = taps.iter().position(|t| t == tap) {
                        found[k] = Some((*tap, c, h, w));
                    }
                }
            }
        }
        found.into_iter().flatten().collect()
    }
}

#[derive(Debug, Clone)]
enum Backbone {
    Identity,
    RandomConv(Vec<Net>),
    Vgg(Net),
}

/// An immutable encoder: `encode` may run concurrently on different frames.
#[derive(Debug, Clone)]
pub struct Encoder {
    spec: EncoderSpec,
    backbone: Backbone,
}

fn random_net(seed: u64, in_channels: usize) -> Net {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(in_channels as u64);
    let mut ops = Vec::new();
    let mut in_c = in_channels;
    for (block, &out_c) in RANDOM_CONV_WIDTHS.iter().enumerate() {
        if block > 0 {
            ops.push(Op::Pool);
        }
        let scale = (2.0 / (in_c * 9) as f64).sqrt();
        let kernel = (0..out_c * in_c * 9)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let bias = (0..out_c).map(|_| rng.random_range(-0.05..0.05)).collect();
        ops.push(Op::ConvRelu(Conv {
            out_c,
            in_c,
            kh: 3,
            kw: 3,
            kernel,
            bias,
        }));
        ops.push(Op::Emit(if block == 0 { Tap::Relu1 } else { Tap::Relu2 }));
        in_c = out_c;
    }
    Net { in_channels, ops }
}

fn vgg_net(weights: &WeightBundle, taps: &[Tap]) -> Net {
    let depth = vgg_depth(taps);
    let mut ops = Vec::new();
    for layer in &weights.layers[..depth] {
        ops.push(Op::ConvRelu(Conv::from(layer)));
        if let Some(tap) = Tap::VGG.iter().find(|t| t.vgg_layer() == Some(layer.name.as_str())) {
            ops.push(Op::Emit(*tap));
        }
        if VGG19_POOL_AFTER.contains(&layer.name.as_str()) {
            ops.push(Op::Pool);
        }
    }
    Net { in_channels: 3, ops }
}

/// Builds an encoder. `vgg_shallow` needs `weights` (or a loadable
/// `spec.weights_path`); `random_conv` needs a seed.
pub fn build_encoder(spec: &EncoderSpec, weights: Option<WeightBundle>) -> Result<Encoder> {
    spec.validate()?;
    let backbone = match spec.kind {
        EncoderKind::Identity => Backbone::Identity,
        EncoderKind::RandomConv => {
            let seed = spec
                .seed
                .ok_or_else(|| VcdError::Config("random_conv encoder needs a seed".into()))?;
            Backbone::RandomConv(vec![random_net(seed, 1), random_net(seed, 3)])
        }
        EncoderKind::VggShallow => {
            let weights = match (weights, &spec.weights_path) {
                (Some(w), _) => w,
                (None, Some(path)) => load_weights(path, spec)?,
                (None, None) => {
                    return Err(VcdError::Config("vgg_shallow encoder needs weights".into()))
                }
            };
            weights.validate()?;
            weights.validate_vgg(&spec.taps)?;
            Backbone::Vgg(vgg_net(&weights, &spec.taps))
        }
    };
    Ok(Encoder {
        spec: spec.clone(),
        backbone,
    })
}

impl Encoder {
    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn taps(&self) -> &[Tap] {
        &self.spec.taps
    }

    fn net_for(&self, channels: usize) -> Result<Option<&Net>> {
        match &self.backbone {
            Backbone::Identity => Ok(None),
            Backbone::RandomConv(nets) => nets
                .iter()
                .find(|n| n.in_channels == channels)
                .map(Some)
                .ok_or_else(|| VcdError::Shape(format!("random_conv cannot take {channels} channels"))),
            Backbone::Vgg(net) if channels == 3 => Ok(Some(net)),
            Backbone::Vgg(_) => Err(VcdError::Shape(format!(
                "vgg_shallow needs 3-channel input, got {channels}"
            ))),
        }
    }

    /// One feature map per tap, in tap order.
    pub fn encode(&self, frame: &Frame) -> Result<Vec<FeatureMap>> {
        let Some(net) = self.net_for(frame.channels())? else {
            return Ok(vec![FeatureMap::from_frame(frame, Tap::Input)]);
        };
        let mut input = FeatureMap::from_frame(frame, Tap::Input);
        if matches!(self.backbone, Backbone::Vgg(_)) {
            let plane = frame.height() * frame.width();
            for (c, chunk) in input.data.chunks_mut(plane).enumerate() {
                for v in chunk {
                    *v = (*v - VGG_MEAN[c]) / VGG_STD[c];
                }
            }
        }
        let x = Tensor {
            c: input.channels,
            h: input.height,
            w: input.width,
            data: input.data,
        };
        Ok(net.run(x, &self.spec.taps))
    }

    /// (tap, channels, height, width) of every tap for an input of the given shape.
    pub fn tap_shapes(&self, height: usize, width: usize, channels: usize) -> Result<Vec<(Tap, usize, usize, usize)>> {
        match self.net_for(channels)? {
            None => Ok(vec![(Tap::Input, channels, height, width)]),
            Some(net) => Ok(net.shapes((channels, height, width), &self.spec.taps)),
        }
    }
}
