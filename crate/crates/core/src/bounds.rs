//! Lower bounds on average and peak power under uncoded placement, the
//! convexity probe for the nested power sum, and upper/lower bound gaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combinatorics::{all_subsets, enumerate_classes, UserSet};
use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::power::{min_power, tradeoff_point, TradeoffPoint};

/// Largest `min{N, K}` for which the peak lower bound enumerates subsets.
pub const PEAK_LB_ENUM_MAX: usize = 20;

/// Tolerance used when checking that `[min{N, K}]` attains the subset maximum.
const MAXIMIZER_TOLERANCE: f64 = 1e-9;

/// Per-layer rates left after the `i` best-case cache hits, `R (1 - min{iM/N, 1})`.
pub fn lb_rate_terms(cfg: &SystemConfig, count: usize) -> Vec<f64> {
    let p = cfg.cached_fraction();
    (1..=count)
        .map(|i| cfg.rate() * (1.0 - (i as f64 * p).min(1.0)))
        .collect()
}

/// Nested power sum of `terms` on the users of `set`, weakest first.
fn nested_sum(terms: &[f64], cfg: &SystemConfig, set: UserSet) -> f64 {
    // users are index-sorted and gains non-decreasing, so ascending user
    // order is ascending gain order
    let gains: Vec<f64> = set.iter().map(|k| cfg.gain(k)).collect();
    min_power(&terms[..gains.len()], &gains).total
}

/// Lower bound on the expected power over uniform demands.
pub fn lower_bound_average(cfg: &SystemConfig) -> Result<f64> {
    let classes = enumerate_classes(cfg.users(), cfg.files())?;
    let terms = lb_rate_terms(cfg, cfg.max_distinct());
    let parts: Vec<f64> = classes
        .par_iter()
        .map(|w| w.probability * nested_sum(&terms, cfg, w.class.leader_set()))
        .collect();
    Ok(parts.iter().sum())
}

/// Lower bound on the peak power.
///
/// Every nonempty subset of the `min{N, K}` weakest users is tried when that
/// count is at most [`PEAK_LB_ENUM_MAX`], and the full set is checked to
/// attain the maximum. Above the cap the full set is evaluated directly.
pub fn lower_bound_peak(cfg: &SystemConfig) -> Result<f64> {
    let served = cfg.max_distinct();
    let terms = lb_rate_terms(cfg, served);
    let full = nested_sum(&terms, cfg, UserSet::first(served));
    if served > PEAK_LB_ENUM_MAX {
        return Ok(full);
    }
    let best = lower_bound_peak_enumerated(cfg)?;
    if full < best * (1.0 - MAXIMIZER_TOLERANCE) {
        return Err(Error::Inconsistent(format!(
            "peak lower bound at M = {}: full set gives {full}, subset maximum is {best}",
            cfg.memory()
        )));
    }
    Ok(best)
}

/// Maximum of the nested sum over all nonempty subsets of `[min{N, K}]`.
pub fn lower_bound_peak_enumerated(cfg: &SystemConfig) -> Result<f64> {
    let served = cfg.max_distinct();
    if served > PEAK_LB_ENUM_MAX {
        return Err(Error::LimitExceeded {
            what: "min(N, K) for subset enumeration",
            requested: served,
            limit: PEAK_LB_ENUM_MAX,
        });
    }
    let terms = lb_rate_terms(cfg, served);
    let sets: Vec<UserSet> = all_subsets(served).skip(1).collect();
    Ok(sets
        .par_iter()
        .map(|&s| nested_sum(&terms, cfg, s))
        .reduce(|| 0.0, f64::max))
}

/// Outcome of [`convexity_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    /// Pairs whose midpoint exceeds the chord by more than the tolerance.
    pub violations: usize,
    /// Largest `f(mid) - (f(s) + f(s')) / 2` observed, zero or negative when convex.
    pub max_excess: f64,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Tolerance on midpoint convexity checks.
pub const CONVEXITY_TOLERANCE: f64 = 1e-9;

/// Midpoint convexity test of the nested power sum `f(s_1, ..., s_dim)`
/// on `trials` random pairs drawn uniformly from `[0, rate]^dim`.
///
/// `gains` must hold at least `dim` non-decreasing values; the first `dim` are used.
pub fn convexity_probe(dim: usize, gains: &[f64], trials: usize, seed: u64, rate: f64) -> ConvexityReport {
    assert!(dim >= 1 && dim <= gains.len(), "dim must be in 1..=gains.len()");
    let gains = &gains[..dim];
    let f = |s: &[f64]| min_power(s, gains).total;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..trials {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..=rate)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..=rate)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let excess = f(&mid) - 0.5 * (f(&a) + f(&b));
        if excess > CONVEXITY_TOLERANCE {
            violations += 1;
        }
        max_excess = max_excess.max(excess);
    }
    ConvexityReport {
        dim,
        trials,
        seed,
        violations,
        max_excess,
    }
}

/// Upper bound divided by lower bound, `None` when the lower bound is zero.
///
/// A zero lower bound with a positive upper bound is reported as an error.
pub fn gap(upper: f64, lower: f64) -> Result<Option<f64>> {
    if lower > 0.0 {
        Ok(Some(upper / lower))
    } else if upper == 0.0 {
        Ok(None)
    } else {
        Err(Error::Inconsistent(format!(
            "upper bound {upper} is positive where the lower bound is zero"
        )))
    }
}

/// Upper and lower bounds at one cache size, with their ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub upper: TradeoffPoint,
    pub avg_lb: f64,
    pub peak_lb: f64,
    pub gap_avg_c: Option<f64>,
    pub gap_avg_d: Option<f64>,
    pub gap_peak_c: Option<f64>,
    pub gap_peak_d: Option<f64>,
}

impl BoundPoint {
    pub fn memory(&self) -> f64 {
        self.upper.memory
    }
}

/// All bounds and gaps at `cfg.memory()`.
pub fn gaps(cfg: &SystemConfig) -> Result<BoundPoint> {
    let upper = tradeoff_point(cfg)?;
    let avg_lb = lower_bound_average(cfg)?;
    let peak_lb = lower_bound_peak(cfg)?;
    Ok(BoundPoint {
        upper,
        avg_lb,
        peak_lb,
        gap_avg_c: gap(upper.avg_ub_c, avg_lb)?,
        gap_avg_d: gap(upper.avg_ub_d, avg_lb)?,
        gap_peak_c: gap(upper.peak_ub_c, peak_lb)?,
        gap_peak_d: gap(upper.peak_ub_d, peak_lb)?,
    })
}
