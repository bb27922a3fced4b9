//! Video Consistency Distance (VCD).
//!
//! Scores how faithfully each frame of a generated video preserves the
//! attributes of its conditioning image. Frames are passed through a shallow
//! encoder, every feature map is taken to the frequency domain, and the
//! amplitude and phase coefficients are compared as empirical distributions
//! with a sliced Wasserstein distance. A temporal weight `(N - i + 1) / N`
//! relaxes the pull toward the conditioning image for later frames.
//!
//! Module map:
//!
//! * [`media`]: frames, videos, PPM/PGM/VCDF loading.
//! * [`encoder`]: identity, seeded random conv and VGG-style encoders.
//! * [`spectra`]: 2D DFT and amplitude/phase point clouds.
//! * [`transport`]: exact 1D and sliced Wasserstein distances.
//! * [`metrics`]: FDL, per-frame VCD, variants and video reports.
//! * [`reward`]: a toy parametric video optimized against the metric.
//! * [`config`], [`report`], [`plot`], [`bridge`]: text config, report
//!   serialization, SVG charts and the flat-buffer scoring entry point.

pub mod bridge;
pub mod config;
pub mod encoder;
mod error;
pub mod media;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod reward;
pub mod spectra;
pub mod transport;

pub use error::{Result, VcdError};
