//! Desk-scale reward optimization.
//!
//! A toy generator renders an `N`-frame video from a conditioning image and
//! per-frame parameters (integer circular shift, gain, bias). The reward of a
//! video is the negated mean per-frame consistency distance; [`optimize`]
//! maximizes it (minimizes the objective) with a derivative-free search,
//! since the generator is piecewise constant in the integer shifts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::media::{Frame, Video};
use crate::metrics::{select_indices, MetricConfig, Reference, Scorer, Variant};
use crate::{Result, VcdError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    pub dx: i64,
    pub dy: i64,
    pub gain: f64,
    pub bias: f64,
}

impl FrameParams {
    pub const IDENTITY: FrameParams = FrameParams {
        dx: 0,
        dy: 0,
        gain: 1.0,
        bias: 0.0,
    };

    pub fn shift(dx: i64, dy: i64) -> Self {
        Self {
            dx,
            dy,
            ..Self::IDENTITY
        }
    }
}

/// Parameters of frames `2..=N`; frame 1 is always the conditioning image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVideo {
    frames: Vec<FrameParams>,
}

impl ParamVideo {
    pub fn new(frames: Vec<FrameParams>) -> Result<Self> {
        if frames.is_empty() {
            return Err(VcdError::Arity("a parametric video needs N >= 2 frames".into()));
        }
        Ok(Self { frames })
    }

    /// `n` frames that all reproduce the conditioning image.
    pub fn identity(n: usize) -> Result<Self> {
        Self::uniform(n, FrameParams::IDENTITY)
    }

    pub fn uniform(n: usize, params: FrameParams) -> Result<Self> {
        Self::new(vec![params; n.saturating_sub(1)])
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len() + 1
    }

    /// Parameters of frame `i` (`2..=N`).
    pub fn get(&self, i: usize) -> Option<&FrameParams> {
        i.checked_sub(2).and_then(|k| self.frames.get(k))
    }

    pub fn frames(&self) -> &[FrameParams] {
        &self.frames
    }

    fn check(&self, height: usize, width: usize) -> Result<()> {
        for (k, p) in self.frames.iter().enumerate() {
            if p.dx.unsigned_abs() as usize >= width || p.dy.unsigned_abs() as usize >= height {
                return Err(VcdError::Domain(format!(
                    "frame {} shift ({}, {}) exceeds the {height}x{width} frame",
                    k + 2,
                    p.dx,
                    p.dy
                )));
            }
            if !p.gain.is_finite() || !p.bias.is_finite() {
                return Err(VcdError::Domain(format!("frame {} gain/bias must be finite", k + 2)));
            }
        }
        Ok(())
    }
}

fn render_frame(cond: &Frame, p: &FrameParams) -> Frame {
    let (g, b) = (p.gain as f32, p.bias as f32);
    cond.circshift(p.dx, p.dy).map_clamped(|v| g * v + b)
}

/// Frame 1 is `cond`; frame `i` is `clamp(g_i * circshift(cond, dx_i, dy_i) + b_i)`.
pub fn render_param_video(cond: &Frame, params: &ParamVideo) -> Result<Video> {
    params.check(cond.height(), cond.width())?;
    let mut frames = Vec::with_capacity(params.frame_count());
    frames.push(cond.clone());
    frames.extend(params.frames.iter().map(|p| render_frame(cond, p)));
    Video::new(frames, 1)
}

/// Additive Gaussian pixel noise, averaged over a fixed set of seeded draws so
/// that the expectation over the generator is estimated with common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
}

fn noisy(frame: &Frame, sigma: f64, seed: u64, stream: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    frame.map_clamped(|v| v + (sigma * rng.sample::<f64, _>(StandardNormal)) as f32)
}

/// Scores rendered frames against a fixed conditioning image, caching the
/// encoded reference.
struct Evaluator<'a> {
    cond: &'a Frame,
    scorer: Scorer,
    reference: Reference,
    noise: Option<NoiseModel>,
    n: usize,
    /// Frame indices contributing to the objective.
    active: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    fn new(cond: &'a Frame, n: usize, cfg: &MetricConfig, noise: Option<NoiseModel>) -> Result<Self> {
        if let Some(m) = &noise {
            if !(m.sigma.is_finite() && m.sigma >= 0.0) || m.samples == 0 {
                return Err(VcdError::Config("noise needs sigma >= 0 and at least one sample".into()));
            }
        }
        let scorer = Scorer::new(cfg)?;
        let reference = scorer.prepare(cond, Variant::Vcd)?;
        let active = select_indices(n, 1, cfg.frame_sample_count, cfg.sample_seed)?;
        Ok(Self {
            cond,
            scorer,
            reference,
            noise,
            n,
            active,
        })
    }

    /// (weighted total, unweighted distance) of frame `i` rendered with `p`.
    fn frame_terms(&self, i: usize, p: &FrameParams) -> Result<(f64, f64)> {
        let frame = render_frame(self.cond, p);
        let alpha = self.scorer.config().alpha;
        let terms = |f: &Frame| -> Result<(f64, f64)> {
            let s = self.scorer.score(&self.reference, f, i, self.n)?;
            Ok((s.total, s.amp + alpha * s.phase))
        };
        match self.noise {
            None => terms(&frame),
            Some(m) => {
                let (mut total, mut plain) = (0.0, 0.0);
                for s in 0..m.samples {
                    let stream = (i as u64) << 32 | s as u64;
                    let (t, u) = terms(&noisy(&frame, m.sigma, m.seed, stream))?;
                    total += t;
                    plain += u;
                }
                Ok((total / m.samples as f64, plain / m.samples as f64))
            }
        }
    }

    fn all_terms(&self, params: &ParamVideo) -> Result<Vec<(f64, f64)>> {
        self.active
            .par_iter()
            .map(|&i| self.frame_terms(i, params.get(i).expect("index in range")))
            .collect()
    }

    fn mean(terms: &[(f64, f64)]) -> f64 {
        terms.iter().map(|t| t.0).sum::<f64>() / terms.len() as f64
    }
}

/// Mean per-frame consistency distance of the rendered video (the negated reward).
pub fn objective(cond: &Frame, params: &ParamVideo, cfg: &MetricConfig) -> Result<f64> {
    expected_objective(cond, params, cfg, None)
}

/// [`objective`] under an optional noisy generator.
pub fn expected_objective(
    cond: &Frame,
    params: &ParamVideo,
    cfg: &MetricConfig,
    noise: Option<NoiseModel>,
) -> Result<f64> {
    params.check(cond.height(), cond.width())?;
    let eval = Evaluator::new(cond, params.frame_count(), cfg, noise)?;
    Ok(Evaluator::mean(&eval.all_terms(params)?))
}

pub fn reward(cond: &Frame, params: &ParamVideo, cfg: &MetricConfig) -> Result<f64> {
    Ok(-objective(cond, params, cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestParams {
    pub params: ParamVideo,
    pub objective: f64,
}

/// Optimization history. `objectives[k]` is the objective of the accepted
/// state after evaluation `k` (entry 0 is the initial parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    pub seed: u64,
    pub budget: usize,
    pub objectives: Vec<f64>,
    pub best: BestParams,
}

impl OptTrace {
    pub fn iterations(&self) -> usize {
        self.objectives.len()
    }

    pub fn initial_objective(&self) -> f64 {
        self.objectives[0]
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| -o).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    /// Share of proposals that restart a shift from the next unvisited grid point.
    pub restart_probability: f64,
    /// Share of proposals that copy the shift of the best-scoring other frame.
    pub migrate_probability: f64,
    /// Share of proposals that move a shift by one pixel.
    pub neighbour_probability: f64,
    /// Initial gain/bias step; the remaining proposals are gain/bias steps.
    pub initial_step: f64,
    pub min_step: f64,
    pub noise: Option<NoiseModel>,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            restart_probability: 0.7,
            migrate_probability: 0.1,
            neighbour_probability: 0.1,
            initial_step: 0.25,
            min_step: 1.0 / 1024.0,
            noise: None,
        }
    }
}

/// [`optimize_with`] using default search settings.
pub fn optimize(cond: &Frame, init: &ParamVideo, budget: usize, seed: u64, cfg: &MetricConfig) -> Result<OptTrace> {
    optimize_with(cond, init, budget, seed, cfg, &SearchSettings::default())
}

/// Representative range of circular shifts along an axis of length `len`.
fn shift_range(len: usize) -> (i64, i64) {
    (-((len as i64 - 1) / 2), len as i64 / 2)
}

fn wrap(v: i64, (lo, hi): (i64, i64)) -> i64 {
    lo + (v - lo).rem_euclid(hi - lo + 1)
}

#[derive(Clone, Copy, PartialEq)]
enum Move {
    Restart,
    Migrate,
    Neighbour,
    Coordinate,
}

/// Minimizes the objective within `budget` objective evaluations.
///
/// Frames are visited round robin and each visit makes one proposal:
///
/// * restart: the next point of a seeded permutation of all distinct
///   circular shifts, so restarts never repeat;
/// * migrate: the shift of the other frame with the lowest unweighted distance;
/// * neighbour: a one-pixel shift step, wrapping around;
/// * coordinate: a step on gain or bias, trying both signs and halving the
///   step after a failure.
///
/// Only strict improvements are accepted. The phase term is flat away from
/// the exact shift on broadband images, which is why restarts cover the grid
/// instead of sampling it with replacement.
pub fn optimize_with(
    cond: &Frame,
    init: &ParamVideo,
    budget: usize,
    seed: u64,
    cfg: &MetricConfig,
    settings: &SearchSettings,
) -> Result<OptTrace> {
    if budget == 0 {
        return Err(VcdError::Config("optimization budget must be >= 1".into()));
    }
    let (h, w) = (cond.height(), cond.width());
    init.check(h, w)?;
    let eval = Evaluator::new(cond, init.frame_count(), cfg, settings.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (xr, yr) = (shift_range(w), shift_range(h));
    let mut grid: Vec<(i64, i64)> = (yr.0..=yr.1)
        .flat_map(|dy| (xr.0..=xr.1).map(move |dx| (dx, dy)))
        .collect();
    grid.shuffle(&mut rng);
    let mut grid_cursor = 0;

    let mut params = init.clone();
    let mut terms = eval.all_terms(&params)?;
    let mut current = Evaluator::mean(&terms);
    let mut objectives = vec![current];
    let mut steps = vec![[settings.initial_step; 2]; eval.active.len()];
    let mut coordinate = 0usize;
    let mut cursor = 0usize;
    let mut evaluations = 1;

    while evaluations < budget && current > 0.0 {
        let slot = cursor % eval.active.len();
        cursor += 1;
        let i = eval.active[slot];
        let base = *params.get(i).expect("index in range");

        let r = rng.random::<f64>();
        let mut mv = if r < settings.restart_probability {
            Move::Restart
        } else if r < settings.restart_probability + settings.migrate_probability {
            Move::Migrate
        } else if r < settings.restart_probability + settings.migrate_probability + settings.neighbour_probability {
            Move::Neighbour
        } else {
            Move::Coordinate
        };
        if mv == Move::Restart && grid_cursor >= grid.len() {
            mv = Move::Neighbour;
        }
        let donor = (0..terms.len())
            .filter(|&k| k != slot)
            .min_by(|&a, &b| terms[a].1.total_cmp(&terms[b].1))
            .map(|k| *params.get(eval.active[k]).expect("index in range"))
            .filter(|d| (d.dx, d.dy) != (base.dx, base.dy));
        if mv == Move::Migrate && donor.is_none() {
            mv = Move::Neighbour;
        }
        if mv == Move::Coordinate && steps[slot].iter().all(|s| *s < settings.min_step) {
            mv = Move::Neighbour;
        }

        let mut candidates = Vec::with_capacity(2);
        let mut p = base;
        match mv {
            Move::Restart => {
                (p.dx, p.dy) = grid[grid_cursor];
                grid_cursor += 1;
                candidates.push(p);
            }
            Move::Migrate => {
                let d = donor.expect("checked above");
                (p.dx, p.dy) = (d.dx, d.dy);
                candidates.push(p);
            }
            Move::Neighbour => {
                match rng.random_range(0..4) {
                    0 => p.dx = wrap(p.dx + 1, xr),
                    1 => p.dx = wrap(p.dx - 1, xr),
                    2 => p.dy = wrap(p.dy + 1, yr),
                    _ => p.dy = wrap(p.dy - 1, yr),
                }
                candidates.push(p);
            }
            Move::Coordinate => {
                coordinate ^= 1;
                let step = steps[slot][coordinate];
                for sign in [1.0, -1.0] {
                    let mut p = base;
                    if coordinate == 0 {
                        p.gain += sign * step;
                    } else {
                        p.bias += sign * step;
                    }
                    candidates.push(p);
                }
            }
        }

        let mut improved = false;
        for p in candidates {
            if evaluations >= budget || p == base {
                continue;
            }
            let t = eval.frame_terms(i, &p)?;
            evaluations += 1;
            let mut trial = terms.clone();
            trial[slot] = t;
            let value = Evaluator::mean(&trial);
            if value < current {
                current = value;
                terms = trial;
                params.frames[i - 2] = p;
                improved = true;
            }
            objectives.push(current);
            if improved {
                break;
            }
        }
        if mv == Move::Coordinate && !improved {
            steps[slot][coordinate] *= 0.5;
        }
    }

    Ok(OptTrace {
        seed,
        budget,
        objectives,
        best: BestParams {
            params,
            objective: current,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(size: usize) -> Frame {
        Frame::from_fn(size, size, 3, |y, x, c| {
            let v = ((y * 13 + x * 7 + c * 5 + (x * y) % 3) % 17) as f32 / 16.0;
            0.1 + 0.8 * v
        })
        .unwrap()
    }

    #[test]
    fn identity_params_reproduce_cond() {
        let cond = texture(8);
        let video = render_param_video(&cond, &ParamVideo::identity(4).unwrap()).unwrap();
        assert_eq!(video.frame_count(), 4);
        assert!(video.frames().iter().all(|f| f == &cond));
        assert_eq!(objective(&cond, &ParamVideo::identity(4).unwrap(), &MetricConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_gain_and_single_column_shift() {
        let cond = texture(6);
        let flat = ParamVideo::uniform(2, FrameParams { dx: 0, dy: 0, gain: 0.0, bias: 0.5 }).unwrap();
        let v = render_param_video(&cond, &flat).unwrap();
        assert!(v.frame(2).unwrap().data().iter().all(|&x| x == 0.5));
        let shifted = ParamVideo::uniform(2, FrameParams::shift(1, 0)).unwrap();
        let v = render_param_video(&cond, &shifted).unwrap();
        assert_eq!(v.frame(2).unwrap(), &cond.circshift(1, 0));
    }

    #[test]
    fn shift_bounds() {
        let cond = texture(6);
        let p = ParamVideo::uniform(2, FrameParams::shift(6, 0)).unwrap();
        assert!(matches!(render_param_video(&cond, &p), Err(VcdError::Domain(_))));
        let p = ParamVideo::uniform(2, FrameParams::shift(0, -6)).unwrap();
        assert!(matches!(objective(&cond, &p, &MetricConfig::default()), Err(VcdError::Domain(_))));
        assert!(ParamVideo::identity(1).is_err());
    }

    #[test]
    fn objective_matches_video_report_mean() {
        let cond = texture(8);
        let params = ParamVideo::new(vec![FrameParams::shift(1, 0), FrameParams { dx: 0, dy: 2, gain: 0.9, bias: 0.05 }]).unwrap();
        let cfg = MetricConfig::default();
        let video = render_param_video(&cond, &params).unwrap();
        let report = crate::metrics::vcd_video(&video, &cfg).unwrap();
        assert_eq!(objective(&cond, &params, &cfg).unwrap(), report.mean);
        assert_eq!(reward(&cond, &params, &cfg).unwrap(), -report.mean);
    }

    #[test]
    fn already_optimal_start() {
        let cond = texture(8);
        let init = ParamVideo::identity(3).unwrap();
        let trace = optimize(&cond, &init, 50, 1, &MetricConfig::default()).unwrap();
        assert_eq!(trace.best.objective, 0.0);
        assert_eq!(trace.best.params, init);
    }

    #[test]
    fn trace_is_monotone_and_deterministic() {
        let cond = texture(8);
        let init = ParamVideo::uniform(3, FrameParams { dx: 2, dy: 1, gain: 0.8, bias: 0.1 }).unwrap();
        let cfg = MetricConfig::default();
        let a = optimize(&cond, &init, 120, 4, &cfg).unwrap();
        let b = optimize(&cond, &init, 120, 4, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.objectives.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.objectives.len() <= 120);
        assert!(a.best.objective <= a.initial_objective());
        assert!(a.objectives.iter().all(|o| a.best.objective <= *o));
        assert_eq!(objective(&cond, &a.best.params, &cfg).unwrap(), a.best.objective);
        assert!(optimize(&cond, &init, 0, 4, &cfg).is_err());
    }

    #[test]
    fn noisy_expectation_is_deterministic_and_positive() {
        let cond = texture(8);
        let params = ParamVideo::identity(3).unwrap();
        let noise = Some(NoiseModel { sigma: 0.05, samples: 3, seed: 2 });
        let cfg = MetricConfig::default();
        let a = expected_objective(&cond, &params, &cfg, noise).unwrap();
        assert!(a > 0.0);
        assert_eq!(a, expected_objective(&cond, &params, &cfg, noise).unwrap());
    }
}
