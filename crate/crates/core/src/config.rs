//! Line-oriented `key = value` configuration text.
//!
//! ```text
//! # comments start with '#'
//! encoder = random_conv        # identity | random_conv | vgg_shallow
//! taps = relu1,relu2
//! encoder_seed = 7
//! weights = vgg19_shallow.vcdw
//! mode = channel_vector        # scalar | channel_vector (cvec)
//! projections = 64
//! swd_seed = 0
//! order = 2
//! alpha = 1
//! eps_rel = 1e-8
//! use_temporal_weight = true
//! sample_frames = none         # or a count
//! tap_combine = sum            # sum | mean
//! sample_seed = 0
//! seed = 0                     # sets encoder_seed, swd_seed and sample_seed
//! ```
//!
//! Later lines override earlier ones. A [`ConfigBuilder`] also takes
//! programmatic overrides, which is how command-line flags win over a file.

use std::path::PathBuf;
use std::str::FromStr;

use crate::encoder::{EncoderKind, EncoderSpec, Tap};
use crate::metrics::{MetricConfig, TapCombine};
use crate::spectra::PoolingMode;
use crate::transport::Order;
use crate::{Result, VcdError};

#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    pub encoder: Option<EncoderKind>,
    pub taps: Option<Vec<Tap>>,
    pub encoder_seed: Option<u64>,
    pub weights: Option<PathBuf>,
    pub mode: Option<PoolingMode>,
    pub projections: Option<usize>,
    pub swd_seed: Option<u64>,
    pub order: Option<Order>,
    pub alpha: Option<f64>,
    pub eps_rel: Option<f64>,
    pub use_temporal_weight: Option<bool>,
    pub sample_frames: Option<Option<usize>>,
    pub tap_combine: Option<TapCombine>,
    pub sample_seed: Option<u64>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| VcdError::Parse(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(VcdError::Parse(format!("invalid boolean {value:?} for {key}"))),
    }
}

pub fn parse_taps(value: &str) -> Result<Vec<Tap>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Tap::from_str)
        .collect()
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.encoder_seed = Some(seed);
        self.swd_seed = Some(seed);
        self.sample_seed = Some(seed);
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "encoder" => self.encoder = Some(value.parse()?),
            "taps" => self.taps = Some(parse_taps(value)?),
            "encoder_seed" => self.encoder_seed = Some(parse(key, value)?),
            "weights" => self.weights = Some(PathBuf::from(value)),
            "mode" => self.mode = Some(value.parse()?),
            "projections" => self.projections = Some(parse(key, value)?),
            "swd_seed" => self.swd_seed = Some(parse(key, value)?),
            "order" => self.order = Some(value.parse()?),
            "alpha" => self.alpha = Some(parse(key, value)?),
            "eps_rel" => self.eps_rel = Some(parse(key, value)?),
            "use_temporal_weight" => self.use_temporal_weight = Some(parse_bool(key, value)?),
            "sample_frames" => {
                self.sample_frames = Some(match value {
                    "none" | "all" | "" => None,
                    v => Some(parse(key, v)?),
                })
            }
            "tap_combine" => self.tap_combine = Some(value.parse()?),
            "sample_seed" => self.sample_seed = Some(parse(key, value)?),
            "seed" => self.set_seed(parse(key, value)?),
            other => return Err(VcdError::Parse(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                VcdError::Parse(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| VcdError::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<MetricConfig> {
        let defaults = MetricConfig::default();
        let kind = self.encoder.unwrap_or(defaults.encoder.kind);
        let encoder = EncoderSpec {
            kind,
            taps: self.taps.clone().unwrap_or_else(|| kind.default_taps()),
            seed: match kind {
                EncoderKind::RandomConv => Some(self.encoder_seed.unwrap_or(0)),
                _ => None,
            },
            weights_path: match kind {
                EncoderKind::VggShallow => self.weights.clone(),
                _ => None,
            },
        };
        let mut swd = defaults.swd;
        swd.num_projections = self.projections.unwrap_or(swd.num_projections);
        swd.seed = self.swd_seed.unwrap_or(swd.seed);
        swd.order = self.order.unwrap_or(swd.order);
        let cfg = MetricConfig {
            encoder,
            mode: self.mode.unwrap_or(defaults.mode),
            swd,
            alpha: self.alpha.unwrap_or(defaults.alpha),
            eps_rel: self.eps_rel.unwrap_or(defaults.eps_rel),
            use_temporal_weight: self.use_temporal_weight.unwrap_or(defaults.use_temporal_weight),
            frame_sample_count: self.sample_frames.unwrap_or(defaults.frame_sample_count),
            tap_combine: self.tap_combine.unwrap_or(defaults.tap_combine),
            sample_seed: self.sample_seed.unwrap_or(defaults.sample_seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_config_text(text: &str) -> Result<MetricConfig> {
    let mut b = ConfigBuilder::new();
    b.apply_text(text)?;
    b.build()
}

/// Renders a configuration that [`parse_config_text`] reads back unchanged.
pub fn to_config_text(cfg: &MetricConfig) -> String {
    let taps: Vec<&str> = cfg.encoder.taps.iter().map(|t| t.name()).collect();
    let mut out = format!("encoder = {}\ntaps = {}\n", cfg.encoder.kind, taps.join(","));
    if let Some(seed) = cfg.encoder.seed {
        out += &format!("encoder_seed = {seed}\n");
    }
    if let Some(path) = &cfg.encoder.weights_path {
        out += &format!("weights = {}\n", path.display());
    }
    out += &format!(
        "mode = {}\nprojections = {}\nswd_seed = {}\norder = {}\nalpha = {:?}\neps_rel = {:?}\n\
         use_temporal_weight = {}\nsample_frames = {}\ntap_combine = {}\nsample_seed = {}\n",
        cfg.mode,
        cfg.swd.num_projections,
        cfg.swd.seed,
        cfg.swd.order,
        cfg.alpha,
        cfg.eps_rel,
        cfg.use_temporal_weight,
        cfg.frame_sample_count.map_or("none".to_string(), |k| k.to_string()),
        cfg.tap_combine,
        cfg.sample_seed,
    );
    out
}
