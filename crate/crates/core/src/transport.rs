//! Wasserstein distances between equal-size point clouds.
//!
//! In one dimension optimal transport between two uniform empirical measures
//! of the same size matches order statistics, so
//! `W_p(a, b) = ((1/n) sum_k |a_(k) - b_(k)|^p)^(1/p)`.
//! The sliced distance averages the p-th power of that quantity over random
//! unit directions and takes the p-th root.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spectra::PointCloud;
use crate::{Result, VcdError};

/// Identifies the direction sampler: ChaCha8 seeded with `seed_from_u64`,
/// standard-normal coordinates, normalized. Changing the sampler changes
/// every score, so bump this when it does.
pub const DIRECTION_SAMPLER: &str = "chacha8-normal-v1";

pub const DEFAULT_PROJECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(into = "u32", try_from = "u32")]
pub enum Order {
    One,
    #[default]
    Two,
}

impl From<Order> for u32 {
    fn from(o: Order) -> u32 {
        o.value()
    }
}

impl TryFrom<u32> for Order {
    type Error = VcdError;

    fn try_from(v: u32) -> Result<Self> {
        v.to_string().parse()
    }
}

impl Order {
    pub fn value(self) -> u32 {
        match self {
            Order::One => 1,
            Order::Two => 2,
        }
    }

    #[inline]
    fn power(self, d: f64) -> f64 {
        match self {
            Order::One => d.abs(),
            Order::Two => d * d,
        }
    }

    #[inline]
    fn root(self, v: f64) -> f64 {
        match self {
            Order::One => v,
            Order::Two => v.sqrt(),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Order {
    type Err = VcdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Order::One),
            "2" => Ok(Order::Two),
            other => Err(VcdError::Parse(format!("Wasserstein order must be 1 or 2, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwdConfig {
    pub num_projections: usize,
    pub seed: u64,
    pub order: Order,
}

impl Default for SwdConfig {
    fn default() -> Self {
        Self {
            num_projections: DEFAULT_PROJECTIONS,
            seed: 0,
            order: Order::Two,
        }
    }
}

impl SwdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_projections == 0 {
            return Err(VcdError::Config("number of projections must be >= 1".into()));
        }
        Ok(())
    }
}

fn sort(values: &mut [f64]) {
    values.sort_unstable_by(f64::total_cmp);
}

/// Mean of `|a_k - b_k|^p` over already sorted samples.
fn mean_power_sorted(a: &[f64], b: &[f64], order: Order) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| order.power(x - y)).sum();
    sum / a.len() as f64
}

fn check_counts(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(VcdError::SampleCount { left: a, right: b });
    }
    if a == 0 {
        return Err(VcdError::Shape("cannot compare empty samples".into()));
    }
    Ok(())
}

/// Exact 1D Wasserstein distance between two equal-size multisets.
pub fn exact_w1d(a: &[f64], b: &[f64], order: Order) -> Result<f64> {
    check_counts(a.len(), b.len())?;
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(VcdError::Value("Wasserstein inputs must be finite".into()));
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    sort(&mut a);
    sort(&mut b);
    Ok(order.root(mean_power_sorted(&a, &b, order)))
}

/// `count` unit directions in `dim` dimensions.
pub fn directions(dim: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dim * count);
    let mut dir = vec![0.0; dim];
    while out.len() < dim * count {
        for v in dir.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.extend(dir.iter().map(|v| v / norm));
        }
    }
    out
}

/// Sorted 1D projections of one cloud, one row per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedProjections {
    dim: usize,
    len: usize,
    rows: Vec<Vec<f64>>,
}

impl SortedProjections {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// A fixed direction set for one dimensionality; reusable across many
/// distance evaluations so a reference cloud is projected only once.
#[derive(Debug, Clone)]
pub struct Slicer {
    dim: usize,
    order: Order,
    directions: Vec<f64>,
}

impl Slicer {
    pub fn new(dim: usize, cfg: &SwdConfig) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(VcdError::Shape("point dimension must be >= 1".into()));
        }
        let directions = if dim == 1 {
            Vec::new()
        } else {
            directions(dim, cfg.num_projections, cfg.seed)
        };
        Ok(Self {
            dim,
            order: cfg.order,
            directions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn project(&self, cloud: &PointCloud) -> Result<SortedProjections> {
        if cloud.dim() != self.dim {
            return Err(VcdError::Shape(format!(
                "cloud has dimension {}, slicer expects {}",
                cloud.dim(),
                self.dim
            )));
        }
        if cloud.is_empty() {
            return Err(VcdError::Shape("cannot project an empty cloud".into()));
        }
        let rows = if self.dim == 1 {
            let mut row = cloud.values().to_vec();
            sort(&mut row);
            vec![row]
        } else {
            self.directions
                .par_chunks_exact(self.dim)
                .map(|dir| {
                    let mut row: Vec<f64> = cloud
                        .iter()
                        .map(|p| p.iter().zip(dir).map(|(x, d)| x * d).sum())
                        .collect();
                    sort(&mut row);
                    row
                })
                .collect()
        };
        Ok(SortedProjections {
            dim: self.dim,
            len: cloud.len(),
            rows,
        })
    }

    pub fn distance(&self, a: &SortedProjections, b: &SortedProjections) -> Result<f64> {
        if a.dim != self.dim || b.dim != self.dim {
            return Err(VcdError::Shape("projections come from a different slicer".into()));
        }
        check_counts(a.len, b.len)?;
        // per-direction terms are independent; the reduction runs in direction order
        let terms: Vec<f64> = a
            .rows
            .par_iter()
            .zip(&b.rows)
            .map(|(ra, rb)| mean_power_sorted(ra, rb, self.order))
            .collect();
        let mean = terms.iter().sum::<f64>() / terms.len() as f64;
        Ok(self.order.root(mean))
    }
}

/// Sliced Wasserstein distance. One-dimensional clouds skip projection and
/// get the exact distance.
pub fn sliced_wd(a: &PointCloud, b: &PointCloud, cfg: &SwdConfig) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(VcdError::Shape(format!(
            "cloud dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.kind() != b.kind() {
        return Err(VcdError::Shape(format!(
            "cannot compare a {:?} cloud with a {:?} cloud",
            a.kind(),
            b.kind()
        )));
    }
    check_counts(a.len(), b.len())?;
    let slicer = Slicer::new(a.dim(), cfg)?;
    slicer.distance(&slicer.project(a)?, &slicer.project(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::CloudKind;
    use proptest::prelude::*;

    fn cloud(dim: usize, pts: Vec<f64>) -> PointCloud {
        PointCloud::new(CloudKind::Amplitude, dim, pts).unwrap()
    }

    /// Minimum-cost perfect matching by enumerating permutations.
    fn brute_force_w(a: &[f64], b: &[f64], p: i32) -> f64 {
        fn permute(k: usize, idx: &mut Vec<usize>, best: &mut f64, a: &[f64], b: &[f64], p: i32) {
            if k == idx.len() {
                let cost: f64 = idx.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs().powi(p)).sum();
                *best = best.min(cost);
                return;
            }
            for s in k..idx.len() {
                idx.swap(k, s);
                permute(k + 1, idx, best, a, b, p);
                idx.swap(k, s);
            }
        }
        let mut best = f64::INFINITY;
        permute(0, &mut (0..a.len()).collect(), &mut best, a, b, p);
        (best / a.len() as f64).powf(1.0 / p as f64)
    }

    #[test]
    fn exact_examples() {
        assert_eq!(exact_w1d(&[0.0, 1.0], &[2.0, 3.0], Order::One).unwrap(), 2.0);
        assert_eq!(brute_force_w(&[0.0, 1.0], &[2.0, 3.0], 1), 2.0);
        assert_eq!(exact_w1d(&[0.0], &[5.0], Order::Two).unwrap(), 5.0);
        assert_eq!(exact_w1d(&[3.0, -1.0, 2.0], &[2.0, 3.0, -1.0], Order::Two).unwrap(), 0.0);
    }

    #[test]
    fn exact_errors() {
        assert!(matches!(
            exact_w1d(&[0.0, 1.0], &[0.0], Order::Two),
            Err(VcdError::SampleCount { left: 2, right: 1 })
        ));
        assert!(exact_w1d(&[], &[], Order::Two).is_err());
        assert!(matches!(exact_w1d(&[f64::NAN], &[0.0], Order::One), Err(VcdError::Value(_))));
    }

    #[test]
    fn one_dimensional_bypass() {
        let cfg = SwdConfig { num_projections: 3, seed: 99, order: Order::One };
        let d = sliced_wd(&cloud(1, vec![0.0, 1.0]), &cloud(1, vec![2.0, 3.0]), &cfg).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn translation_law_in_2d() {
        let base: Vec<f64> = (0..50).flat_map(|k| [(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()]).collect();
        let moved: Vec<f64> = base.chunks(2).flat_map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
        let cfg = SwdConfig { num_projections: 4096, seed: 7, order: Order::Two };
        let d = sliced_wd(&cloud(2, base), &cloud(2, moved), &cfg).unwrap();
        let expect = 5.0 / 2f64.sqrt();
        assert!((d - expect).abs() <= 0.02 * expect, "{d}");
    }

    #[test]
    fn shape_errors() {
        let cfg = SwdConfig::default();
        assert!(matches!(
            sliced_wd(&cloud(2, vec![0.0; 4]), &cloud(1, vec![0.0; 2]), &cfg),
            Err(VcdError::Shape(_))
        ));
        assert!(matches!(
            sliced_wd(&cloud(2, vec![0.0; 4]), &cloud(2, vec![0.0; 6]), &cfg),
            Err(VcdError::SampleCount { .. })
        ));
        let phase = PointCloud::new(CloudKind::Phase, 2, vec![0.0; 4]).unwrap();
        assert!(sliced_wd(&cloud(2, vec![0.0; 4]), &phase, &cfg).is_err());
        let zero = SwdConfig { num_projections: 0, ..cfg };
        assert!(matches!(
            sliced_wd(&cloud(2, vec![0.0; 4]), &cloud(2, vec![0.0; 4]), &zero),
            Err(VcdError::Config(_))
        ));
    }

    #[test]
    fn directions_are_unit_and_deterministic() {
        let a = directions(3, 10, 5);
        assert_eq!(a, directions(3, 10, 5));
        assert_ne!(a, directions(3, 10, 6));
        for d in a.chunks(3) {
            assert!((d.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn clouds(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..20).prop_flat_map(move |n| {
            (
                prop::collection::vec(-5.0f64..5.0, n * dim),
                prop::collection::vec(-5.0f64..5.0, n * dim),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sorted_formula_matches_brute_force(
            (a, b) in (1usize..6).prop_flat_map(|n| (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )),
            p in 1i32..3,
        ) {
            let order = if p == 1 { Order::One } else { Order::Two };
            let fast = exact_w1d(&a, &b, order).unwrap();
            prop_assert!((fast - brute_force_w(&a, &b, p)).abs() <= 1e-9);
        }

        #[test]
        fn sliced_symmetric_homogeneous_and_zero_on_self(
            (a, b) in clouds(3), seed in any::<u64>(), lambda in 0.1f64..10.0,
        ) {
            let cfg = SwdConfig { num_projections: 16, seed, order: Order::Two };
            let (ca, cb) = (cloud(3, a.clone()), cloud(3, b.clone()));
            let ab = sliced_wd(&ca, &cb, &cfg).unwrap();
            prop_assert_eq!(ab, sliced_wd(&cb, &ca, &cfg).unwrap());
            prop_assert_eq!(sliced_wd(&ca, &ca, &cfg).unwrap(), 0.0);
            prop_assert!(ab >= 0.0);
            let scaled = sliced_wd(
                &cloud(3, a.iter().map(|v| v * lambda).collect()),
                &cloud(3, b.iter().map(|v| v * lambda).collect()),
                &cfg,
            ).unwrap();
            prop_assert!((scaled - lambda * ab).abs() <= 1e-9 * (1.0 + lambda * ab));
        }
    }
}
