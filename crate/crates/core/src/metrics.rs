//! Frequency distribution loss, the per-frame consistency distance and its
//! ablation variants, plus per-video aggregation.
//!
//! For a conditioning image `x_cnd` and frame `x_i` of an `N`-frame video:
//!
//! ```text
//! VCD(x_cnd, x_i) = (N - i + 1) / N * (WD(A(E(x_cnd)), A(E(x_i))) + alpha * WD(P(E(x_cnd)), P(E(x_i))))
//! ```
//!
//! where `A`/`P` are the amplitude/phase point clouds of the per-channel DFT
//! of each encoder tap and `WD` is the sliced Wasserstein distance. Taps are
//! combined by sum (or mean). Video-level numbers are the sum and mean of the
//! per-frame totals over the evaluated frames.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{build_encoder, Encoder, EncoderSpec};
use crate::media::{Frame, Video};
use crate::spectra::{
    amplitude_points, dft2, feature_points, phase_points, PoolingMode, DEFAULT_PHASE_EPS_REL,
};
use crate::transport::{exact_w1d, Order, Slicer, SortedProjections, SwdConfig};
use crate::{Result, VcdError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TapCombine {
    #[default]
    Sum,
    Mean,
}

impl FromStr for TapCombine {
    type Err = VcdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(TapCombine::Sum),
            "mean" => Ok(TapCombine::Mean),
            other => Err(VcdError::Parse(format!("unknown tap combine rule {other:?}"))),
        }
    }
}

impl fmt::Display for TapCombine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TapCombine::Sum => "sum",
            TapCombine::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Sliced WD on amplitude and phase.
    #[default]
    Vcd,
    /// Root-mean-square difference of sorted scalar coefficients.
    VcdL2,
    /// Sliced WD between raw feature values, no DFT. Reported in the amplitude slot.
    VcdFeat,
    AmpOnly,
    PhaseOnly,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Vcd,
        Variant::AmpOnly,
        Variant::PhaseOnly,
        Variant::VcdL2,
        Variant::VcdFeat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vcd => "vcd",
            Variant::VcdL2 => "vcd_l2",
            Variant::VcdFeat => "vcd_feat",
            Variant::AmpOnly => "amp_only",
            Variant::PhaseOnly => "phase_only",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = VcdError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| VcdError::Parse(format!("unknown variant {s:?}")))
    }
}

/// Every knob of the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub encoder: EncoderSpec,
    pub mode: PoolingMode,
    pub swd: SwdConfig,
    /// Weight of the phase term.
    pub alpha: f64,
    pub eps_rel: f64,
    pub use_temporal_weight: bool,
    /// Number of frames to sample per video; all frames when `None`.
    pub frame_sample_count: Option<usize>,
    pub tap_combine: TapCombine,
    pub sample_seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderSpec::identity(),
            mode: PoolingMode::ChannelVector,
            swd: SwdConfig::default(),
            alpha: 1.0,
            eps_rel: DEFAULT_PHASE_EPS_REL,
            use_temporal_weight: true,
            frame_sample_count: None,
            tap_combine: TapCombine::Sum,
            sample_seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.swd.validate()?;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(VcdError::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.eps_rel.is_finite() && self.eps_rel >= 0.0) {
            return Err(VcdError::Config(format!("eps_rel must be finite and >= 0, got {}", self.eps_rel)));
        }
        if self.frame_sample_count == Some(0) {
            return Err(VcdError::Config("frame sample count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub i: usize,
    pub amp: f64,
    pub phase: f64,
    pub weight: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcdReport {
    pub variant: Variant,
    pub config: MetricConfig,
    pub frames: Vec<FrameScore>,
    pub sum: f64,
    pub mean: f64,
}

impl VcdReport {
    fn new(variant: Variant, config: MetricConfig, frames: Vec<FrameScore>) -> Self {
        let sum: f64 = frames.iter().map(|f| f.total).sum();
        let mean = if frames.is_empty() { 0.0 } else { sum / frames.len() as f64 };
        Self {
            variant,
            config,
            frames,
            sum,
            mean,
        }
    }

    pub fn evaluated_indices(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.i).collect()
    }
}

/// `(N - i + 1) / N` for a 1-based frame index.
pub fn temporal_weight(i: usize, n: usize) -> Result<f64> {
    if i == 0 || i > n {
        return Err(VcdError::Domain(format!("frame index {i} outside [1, {n}]")));
    }
    Ok((n - i + 1) as f64 / n as f64)
}

/// Per-tap reference data derived once from the conditioning image.
enum TapReference {
    Spectral {
        slicer: Slicer,
        amp: SortedProjections,
        phase: SortedProjections,
    },
    SortedScalars {
        amp: Vec<f64>,
        phase: Vec<f64>,
    },
    Feature {
        slicer: Slicer,
        values: SortedProjections,
    },
}

/// The conditioning image, encoded and projected for one variant.
pub struct Reference {
    variant: Variant,
    shape: (usize, usize, usize),
    taps: Vec<TapReference>,
}

impl Reference {
    pub fn variant(&self) -> Variant {
        self.variant
    }
}

/// A validated configuration with its encoder built.
pub struct Scorer {
    cfg: MetricConfig,
    encoder: Encoder,
}

impl Scorer {
    pub fn new(cfg: &MetricConfig) -> Result<Self> {
        cfg.validate()?;
        let encoder = build_encoder(&cfg.encoder, None)?;
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
        })
    }

    pub fn with_encoder(cfg: &MetricConfig, encoder: Encoder) -> Result<Self> {
        cfg.validate()?;
        if encoder.spec() != &cfg.encoder {
            return Err(VcdError::Config("encoder does not match the configuration".into()));
        }
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
        })
    }

    pub fn config(&self) -> &MetricConfig {
        &self.cfg
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn prepare(&self, cond: &Frame, variant: Variant) -> Result<Reference> {
        let maps = self.encoder.encode(cond)?;
        let mode = self.cfg.mode;
        let taps = maps
            .iter()
            .map(|map| match variant {
                Variant::VcdFeat => {
                    let cloud = feature_points(map, mode);
                    let slicer = Slicer::new(cloud.dim(), &self.cfg.swd)?;
                    let values = slicer.project(&cloud)?;
                    Ok(TapReference::Feature { slicer, values })
                }
                Variant::VcdL2 => {
                    let spectrum = dft2(map);
                    let amp = amplitude_points(&spectrum, PoolingMode::Scalar).values().to_vec();
                    let phase = phase_points(&spectrum, PoolingMode::Scalar, self.cfg.eps_rel)?
                        .values()
                        .to_vec();
                    Ok(TapReference::SortedScalars { amp, phase })
                }
                Variant::Vcd | Variant::AmpOnly | Variant::PhaseOnly => {
                    let spectrum = dft2(map);
                    let amp = amplitude_points(&spectrum, mode);
                    let phase = phase_points(&spectrum, mode, self.cfg.eps_rel)?;
                    let slicer = Slicer::new(amp.dim(), &self.cfg.swd)?;
                    Ok(TapReference::Spectral {
                        amp: slicer.project(&amp)?,
                        phase: slicer.project(&phase)?,
                        slicer,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Reference {
            variant,
            shape: (cond.height(), cond.width(), cond.channels()),
            taps,
        })
    }

    /// Unweighted (amplitude, phase) terms of `frame` against the reference,
    /// combined over taps. The ablation variants zero the dropped term.
    pub fn terms(&self, reference: &Reference, frame: &Frame) -> Result<(f64, f64)> {
        let shape = (frame.height(), frame.width(), frame.channels());
        if shape != reference.shape {
            return Err(VcdError::DimensionMismatch(format!(
                "frame is {}x{}x{}, conditioning image is {}x{}x{}",
                shape.0, shape.1, shape.2, reference.shape.0, reference.shape.1, reference.shape.2
            )));
        }
        let maps = self.encoder.encode(frame)?;
        let mode = self.cfg.mode;
        let mut amp = 0.0;
        let mut phase = 0.0;
        for (map, tap) in maps.iter().zip(&reference.taps) {
            let (a, p) = match tap {
                TapReference::Spectral {
                    slicer,
                    amp: ra,
                    phase: rp,
                } => {
                    let spectrum = dft2(map);
                    let a = match reference.variant {
                        Variant::PhaseOnly => 0.0,
                        _ => slicer.distance(ra, &slicer.project(&amplitude_points(&spectrum, mode))?)?,
                    };
                    let p = match reference.variant {
                        Variant::AmpOnly => 0.0,
                        _ => {
                            let cloud = phase_points(&spectrum, mode, self.cfg.eps_rel)?;
                            slicer.distance(rp, &slicer.project(&cloud)?)?
                        }
                    };
                    (a, p)
                }
                TapReference::SortedScalars { amp: ra, phase: rp } => {
                    let spectrum = dft2(map);
                    let fa = amplitude_points(&spectrum, PoolingMode::Scalar);
                    let fp = phase_points(&spectrum, PoolingMode::Scalar, self.cfg.eps_rel)?;
                    (
                        exact_w1d(ra, fa.values(), Order::Two)?,
                        exact_w1d(rp, fp.values(), Order::Two)?,
                    )
                }
                TapReference::Feature { slicer, values } => {
                    let cloud = feature_points(map, mode);
                    (slicer.distance(values, &slicer.project(&cloud)?)?, 0.0)
                }
            };
            amp += a;
            phase += p;
        }
        if self.cfg.tap_combine == TapCombine::Mean {
            let k = reference.taps.len() as f64;
            amp /= k;
            phase /= k;
        }
        Ok((amp, phase))
    }

    /// Score of frame `i` of an `n`-frame video.
    pub fn score(&self, reference: &Reference, frame: &Frame, i: usize, n: usize) -> Result<FrameScore> {
        let weight = temporal_weight(i, n)?;
        let (amp, phase) = self.terms(reference, frame)?;
        let unweighted = amp + self.cfg.alpha * phase;
        let total = if self.cfg.use_temporal_weight {
            weight * unweighted
        } else {
            unweighted
        };
        Ok(FrameScore {
            i,
            amp,
            phase,
            weight,
            total,
        })
    }

    /// `A`-distance plus `alpha` times `P`-distance, no temporal weight.
    pub fn fdl(&self, u: &Frame, v: &Frame) -> Result<f64> {
        let reference = self.prepare(u, Variant::Vcd)?;
        let (amp, phase) = self.terms(&reference, v)?;
        Ok(amp + self.cfg.alpha * phase)
    }

    /// Scores a video against its own conditioning frame, or against `cond`
    /// when given. A separate conditioning image of a different size is
    /// resampled bilinearly to the frame size.
    pub fn score_video(&self, video: &Video, cond: Option<&Frame>, variant: Variant) -> Result<VcdReport> {
        let n = video.frame_count();
        let indices = select_indices(
            n,
            video.cond_index(),
            self.cfg.frame_sample_count,
            self.cfg.sample_seed,
        )?;
        let first = video.cond_frame();
        let resized;
        let cond = match cond {
            None => first,
            Some(c) if c.channels() != first.channels() => {
                return Err(VcdError::DimensionMismatch(format!(
                    "conditioning image has {} channels, frames have {}",
                    c.channels(),
                    first.channels()
                )))
            }
            Some(c) if c.same_shape(first) => c,
            Some(c) => {
                resized = c.resize_bilinear(first.height(), first.width())?;
                &resized
            }
        };
        let reference = self.prepare(cond, variant)?;
        let frames = indices
            .par_iter()
            .map(|&i| self.score(&reference, video.frame(i).expect("index in range"), i, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(VcdReport::new(variant, self.cfg.clone(), frames))
    }
}

/// Frames to evaluate: every index except the conditioning one, or a seeded
/// uniform sample of `k` of them without replacement, ascending.
pub fn select_indices(n: usize, cond_index: usize, k: Option<usize>, seed: u64) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(VcdError::Arity(format!("a video needs N >= 2 frames, got {n}")));
    }
    let candidates: Vec<usize> = (1..=n).filter(|&i| i != cond_index).collect();
    let Some(k) = k else {
        return Ok(candidates);
    };
    if k == 0 || k > candidates.len() {
        return Err(VcdError::Config(format!(
            "frame sample count {k} must lie in [1, N - 1 = {}]",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|j| candidates[j])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

pub fn fdl(u: &Frame, v: &Frame, cfg: &MetricConfig) -> Result<f64> {
    Scorer::new(cfg)?.fdl(u, v)
}

pub fn vcd_frame(x_cnd: &Frame, x_i: &Frame, i: usize, n: usize, cfg: &MetricConfig) -> Result<FrameScore> {
    vcd_variant(x_cnd, x_i, i, n, cfg, Variant::Vcd)
}

pub fn vcd_variant(
    x_cnd: &Frame,
    x_i: &Frame,
    i: usize,
    n: usize,
    cfg: &MetricConfig,
    variant: Variant,
) -> Result<FrameScore> {
    let scorer = Scorer::new(cfg)?;
    let reference = scorer.prepare(x_cnd, variant)?;
    scorer.score(&reference, x_i, i, n)
}

pub fn vcd_video(video: &Video, cfg: &MetricConfig) -> Result<VcdReport> {
    Scorer::new(cfg)?.score_video(video, None, Variant::Vcd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderSpec;
    use std::f64::consts::PI;

    fn scalar_identity() -> MetricConfig {
        MetricConfig {
            mode: PoolingMode::Scalar,
            ..MetricConfig::default()
        }
    }

    fn textured(h: usize, w: usize, c: usize) -> Frame {
        Frame::from_fn(h, w, c, |y, x, ch| {
            let v = ((y * 31 + x * 17 + ch * 7) % 23) as f32 / 22.0;
            0.1 + 0.7 * v
        })
        .unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(temporal_weight(1, 10).unwrap(), 1.0);
        assert_eq!(temporal_weight(10, 10).unwrap(), 0.1);
        assert_eq!(temporal_weight(2, 51).unwrap(), 50.0 / 51.0);
        assert!((temporal_weight(2, 51).unwrap() - 0.98039).abs() < 1e-5);
        assert!(matches!(temporal_weight(0, 3), Err(VcdError::Domain(_))));
        assert!(matches!(temporal_weight(4, 3), Err(VcdError::Domain(_))));
    }

    #[test]
    fn fdl_of_shifted_impulse() {
        let u = Frame::new(2, 2, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let v = u.circshift(1, 0);
        let scorer = Scorer::new(&scalar_identity()).unwrap();
        let reference = scorer.prepare(&u, Variant::Vcd).unwrap();
        let (amp, phase) = scorer.terms(&reference, &v).unwrap();
        assert_eq!(amp, 0.0);
        // phases {0,0,0,0} vs {0,pi,0,pi}
        let expect = exact_w1d(&[0.0; 4], &[0.0, 0.0, PI, PI], Order::Two).unwrap();
        assert_eq!(expect, PI / 2f64.sqrt());
        assert!((phase - expect).abs() < 1e-12);
        let total = fdl(&u, &v, &scalar_identity()).unwrap();
        assert!((total - PI / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(fdl(&v, &u, &scalar_identity()).unwrap(), total);
        assert_eq!(fdl(&u, &u, &scalar_identity()).unwrap(), 0.0);
    }

    #[test]
    fn alpha_scales_phase_only() {
        let u = textured(8, 8, 3);
        let v = u.circshift(2, 1);
        let base = fdl(&u, &v, &MetricConfig::default()).unwrap();
        let cfg = MetricConfig {
            alpha: 0.0,
            ..MetricConfig::default()
        };
        let amp_only = fdl(&u, &v, &cfg).unwrap();
        assert!(amp_only < 1e-9);
        assert!(base > 0.0);
    }

    #[test]
    fn frame_score_weight_law() {
        let u = textured(8, 8, 3);
        let v = u.map_clamped(|x| x * 0.8 + 0.05);
        let on = vcd_frame(&u, &v, 3, 7, &MetricConfig::default()).unwrap();
        let off_cfg = MetricConfig {
            use_temporal_weight: false,
            ..MetricConfig::default()
        };
        let off = vcd_frame(&u, &v, 3, 7, &off_cfg).unwrap();
        assert_eq!(on.weight, 5.0 / 7.0);
        assert_eq!(on.total, off.total * (5.0 / 7.0));
        assert_eq!(off.total, off.amp + off.phase);
    }

    #[test]
    fn shifted_frame_has_phase_but_no_amplitude_term() {
        let u = textured(8, 8, 3);
        let s = vcd_frame(&u, &u.circshift(1, 2), 2, 4, &MetricConfig::default()).unwrap();
        assert!(s.amp <= 1e-9, "{}", s.amp);
        assert!(s.phase > 0.0);
    }

    #[test]
    fn variants_on_shift() {
        let u = textured(4, 4, 1);
        let v = u.circshift(1, 0);
        let cfg = MetricConfig::default();
        let score = |variant| vcd_variant(&u, &v, 2, 3, &cfg, variant).unwrap();
        assert!(score(Variant::AmpOnly).total <= 1e-9);
        assert!(score(Variant::PhaseOnly).total > 0.0);
        assert_eq!(score(Variant::VcdFeat).total, 0.0);
        assert!(score(Variant::Vcd).total > 0.0);
        for variant in Variant::ALL {
            assert_eq!(vcd_variant(&u, &u, 2, 3, &cfg, variant).unwrap().total, 0.0);
        }
    }

    #[test]
    fn l2_variant_is_w2_in_scalar_mode() {
        let u = textured(6, 5, 3);
        let v = u.circshift(2, 3).map_clamped(|x| x + 0.05);
        let cfg = scalar_identity();
        let l2 = vcd_variant(&u, &v, 2, 4, &cfg, Variant::VcdL2).unwrap();
        let w2 = vcd_frame(&u, &v, 2, 4, &cfg).unwrap();
        assert!((l2.amp - w2.amp).abs() <= 1e-9);
        assert!((l2.phase - w2.phase).abs() <= 1e-9);
    }

    #[test]
    fn sampling_indices() {
        assert_eq!(select_indices(3, 1, None, 0).unwrap(), vec![2, 3]);
        assert_eq!(select_indices(4, 2, None, 0).unwrap(), vec![1, 3, 4]);
        let s = select_indices(51, 1, Some(5), 9).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.windows(2).all(|w| w[0] < w[1]) && s[0] >= 2);
        assert_eq!(s, select_indices(51, 1, Some(5), 9).unwrap());
        assert_eq!(select_indices(4, 1, Some(3), 1).unwrap(), vec![2, 3, 4]);
        assert!(matches!(select_indices(4, 1, Some(4), 1), Err(VcdError::Config(_))));
    }

    #[test]
    fn video_report_basics() {
        let u = textured(8, 8, 3);
        let video = Video::new(vec![u.clone(), u.clone(), u.circshift(1, 0)], 1).unwrap();
        let report = vcd_video(&video, &MetricConfig::default()).unwrap();
        assert_eq!(report.evaluated_indices(), vec![2, 3]);
        assert_eq!(report.frames[0].total, 0.0);
        assert!(report.frames[1].total > 0.0);
        assert_eq!(report.sum, report.frames[1].total);
        assert_eq!(report.mean, report.sum / 2.0);
        let cfg = MetricConfig {
            frame_sample_count: Some(3),
            ..MetricConfig::default()
        };
        assert!(matches!(vcd_video(&video, &cfg), Err(VcdError::Config(_))));
    }

    #[test]
    fn separate_cond_is_resampled() {
        let u = Frame::filled(8, 8, 3, 0.4).unwrap();
        let video = Video::new(vec![u.clone(), u.clone()], 1).unwrap();
        let big = Frame::filled(16, 12, 3, 0.4).unwrap();
        let scorer = Scorer::new(&MetricConfig::default()).unwrap();
        let r = scorer.score_video(&video, Some(&big), Variant::Vcd).unwrap();
        assert!(r.frames[0].total < 1e-9);
        let gray = Frame::filled(8, 8, 1, 0.4).unwrap();
        assert!(matches!(
            scorer.score_video(&video, Some(&gray), Variant::Vcd),
            Err(VcdError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mismatched_frame_size_is_rejected() {
        let cfg = MetricConfig::default();
        let r = vcd_frame(&textured(8, 8, 3), &textured(8, 6, 3), 2, 2, &cfg);
        assert!(matches!(r, Err(VcdError::DimensionMismatch(_))));
    }

    #[test]
    fn tap_mean_divides_sum() {
        let u = textured(8, 8, 3);
        let v = u.circshift(1, 1);
        let sum_cfg = MetricConfig {
            encoder: EncoderSpec::random_conv(3),
            ..MetricConfig::default()
        };
        let mean_cfg = MetricConfig {
            tap_combine: TapCombine::Mean,
            ..sum_cfg.clone()
        };
        let s = vcd_frame(&u, &v, 2, 2, &sum_cfg).unwrap();
        let m = vcd_frame(&u, &v, 2, 2, &mean_cfg).unwrap();
        assert!((s.total - 2.0 * m.total).abs() <= 1e-12 * s.total.max(1.0));
    }
}
