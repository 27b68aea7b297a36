//! Superposition-coding power allocation and the average/peak power upper bounds.
//!
//! On a degraded Gaussian broadcast channel with unit noise, user `k` decodes
//! layers `1..=k` successively and treats layers above `k` as noise. Layer
//! `k` carrying rate `R_k` needs SINR `2^{2R_k} - 1` at user `k`, which fixes
//! the minimum total power
//!
//! ```text
//! P = sum_k (2^{2R_k} - 1) / h_k^2 * prod_{i<k} 2^{2R_i}
//! ```

use rayon::prelude::*;

use crate::combinatorics::{binom, enumerate_classes};
use crate::error::Result;
use crate::model::{DemandClass, SystemConfig};
use crate::schemes::{scheme_rates, worst_case_class, Scheme};

/// Partial products above this switch the total to log-domain accumulation.
pub const LOG_DOMAIN_THRESHOLD: f64 = 1e300;

/// Largest `K` for which the peak is found by enumerating classes by default.
pub const DEFAULT_ENUMERATE_MAX_USERS: usize = 20;

/// Minimum transmit power for a set of layer rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    /// Total power, `+inf` if it exceeds the `f64` range.
    pub total: f64,
    /// Power `alpha_k P` given to each layer.
    pub layer_shares: Vec<f64>,
    /// `log2` of the total, finite even when `total` overflows.
    pub log2_total: f64,
}

fn snr_gap(rate: f64) -> f64 {
    (2.0 * rate).exp2() - 1.0
}

/// `log2(2^{2r} - 1)` without overflow for large `r`.
fn log2_snr_gap(rate: f64) -> f64 {
    let e = 2.0 * rate;
    if e > 50.0 {
        e + (-(-e).exp2()).ln_1p() / std::f64::consts::LN_2
    } else {
        (e.exp2() - 1.0).log2()
    }
}

/// `log2` of the minimum total power, accumulated as a base-2 log-sum-exp.
pub fn log2_min_power(rates: &[f64], gains: &[f64]) -> f64 {
    let mut prefix = 0.0;
    let mut terms = Vec::with_capacity(rates.len());
    for (&r, &g) in rates.iter().zip(gains) {
        if r > 0.0 {
            terms.push(log2_snr_gap(r) - g.log2() + prefix);
        }
        prefix += 2.0 * r;
    }
    let Some(top) = terms.iter().copied().reduce(f64::max) else {
        return f64::NEG_INFINITY;
    };
    top + terms.iter().map(|x| (x - top).exp2()).sum::<f64>().log2()
}

/// Minimum power to deliver `rates[k]` to user `k` by superposition coding,
/// with the per-layer power split.
pub fn min_power(rates: &[f64], gains: &[f64]) -> PowerResult {
    assert_eq!(rates.len(), gains.len(), "one rate per user");
    let users = rates.len();
    let growth: Vec<f64> = rates.iter().map(|r| (2.0 * r).exp2()).collect();

    let mut total = 0.0;
    let mut prefix = 1.0;
    let mut overflow = false;
    for k in 0..users {
        total += snr_gap(rates[k]) / gains[k] * prefix;
        prefix *= growth[k];
        overflow |= prefix > LOG_DOMAIN_THRESHOLD;
    }

    let layer_shares = (0..users)
        .map(|k| {
            if rates[k] == 0.0 {
                return 0.0;
            }
            let mut interference = 0.0;
            let mut between = 1.0;
            for i in k + 1..users {
                interference += snr_gap(rates[i]) / gains[i] * between;
                between *= growth[i];
            }
            snr_gap(rates[k]) / gains[k] * (1.0 + gains[k] * interference)
        })
        .collect();

    let log2_total = if overflow || !total.is_finite() {
        log2_min_power(rates, gains)
    } else {
        total.log2()
    };
    PowerResult {
        total,
        layer_shares,
        log2_total,
    }
}

/// Power needed by `scheme` for any demand in `class`.
pub fn class_power(class: &DemandClass, cfg: &SystemConfig, scheme: Scheme) -> Result<PowerResult> {
    let rates = scheme_rates(class, cfg, scheme)?;
    Ok(min_power(&rates, cfg.gains()))
}

/// Expected power over uniformly random demands.
///
/// Per-class terms may be computed in parallel; they are summed in class
/// order so the result does not depend on scheduling.
pub fn average_power(cfg: &SystemConfig, scheme: Scheme) -> Result<f64> {
    let classes = enumerate_classes(cfg.users(), cfg.files())?;
    let terms = classes
        .par_iter()
        .map(|w| Ok(w.probability * class_power(&w.class, cfg, scheme)?.total))
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// How the peak power is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakMethod {
    /// Evaluate the worst-case leader set `[min{N, K}]` directly.
    ClosedForm,
    /// Maximize over every demand class.
    Enumerate,
}

impl PeakMethod {
    pub fn default_for(users: usize) -> Self {
        if users <= DEFAULT_ENUMERATE_MAX_USERS {
            PeakMethod::Enumerate
        } else {
            PeakMethod::ClosedForm
        }
    }
}

/// Power needed for the worst demand.
pub fn peak_power(cfg: &SystemConfig, scheme: Scheme, method: PeakMethod) -> Result<f64> {
    match method {
        PeakMethod::ClosedForm => Ok(closed_form_peak(cfg, scheme)),
        PeakMethod::Enumerate => Ok(peak_maximizer(cfg, scheme)?.1),
    }
}

/// The class needing the most power and that power, first class in
/// enumeration order on ties.
pub fn peak_maximizer(cfg: &SystemConfig, scheme: Scheme) -> Result<(DemandClass, f64)> {
    let classes = enumerate_classes(cfg.users(), cfg.files())?;
    let powers = classes
        .par_iter()
        .map(|w| Ok(class_power(&w.class, cfg, scheme)?.total))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &p) in powers.iter().enumerate() {
        if p > powers[best] {
            best = i;
        }
    }
    Ok((classes[best].class.clone(), powers[best]))
}

/// Peak power from the worst-case closed forms.
///
/// The centralized form serves the weakest `min{N, K}` users at the leader
/// rate. The decentralized form uses the geometric-sum exponent
/// `2R (N/M - 1)(1 - q^{i-1})`, `q = 1 - M/N`, whose `M -> 0` limit is `2R(i - 1)`.
pub fn closed_form_peak(cfg: &SystemConfig, scheme: Scheme) -> f64 {
    let served = cfg.max_distinct();
    let r = cfg.rate();
    match scheme {
        Scheme::Centralized => {
            let t = cfg.t();
            let low = t.floor();
            let users = cfg.users() as u64;
            let ratio = |k: usize, tt: f64| {
                let tt = tt as u64;
                binom(users - k as u64, tt).unwrap() as f64 / binom(users, tt).unwrap() as f64
            };
            let rates: Vec<f64> = (1..=cfg.users())
                .map(|k| {
                    if k > served {
                        return 0.0;
                    }
                    let mut rate = ratio(k, low) * (low + 1.0 - t) * r;
                    if t > low {
                        rate += ratio(k, low + 1.0) * (t - low) * r;
                    }
                    rate
                })
                .collect();
            min_power(&rates, cfg.gains()).total
        }
        Scheme::Decentralized => {
            let p = cfg.cached_fraction();
            let q = 1.0 - p;
            (1..=served)
                .map(|i| {
                    let exponent = if p == 0.0 {
                        2.0 * r * (i - 1) as f64
                    } else {
                        2.0 * r * (1.0 / p - 1.0) * (1.0 - q.powi(i as i32 - 1))
                    };
                    snr_gap(r * q.powi(i as i32)) / cfg.gain(i) * exponent.exp2()
                })
                .sum()
        }
    }
}

/// Whether `class` is the worst-case leader set `[min{N, K}]`.
pub fn is_worst_case_class(class: &DemandClass, cfg: &SystemConfig) -> bool {
    *class == worst_case_class(cfg)
}

/// Upper bounds of both schemes at one cache size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub memory: f64,
    pub avg_ub_c: f64,
    pub peak_ub_c: f64,
    pub avg_ub_d: f64,
    pub peak_ub_d: f64,
}

/// Average and peak upper bounds of both schemes at `cfg.memory()`.
pub fn tradeoff_point(cfg: &SystemConfig) -> Result<TradeoffPoint> {
    let method = PeakMethod::default_for(cfg.users());
    Ok(TradeoffPoint {
        memory: cfg.memory(),
        avg_ub_c: average_power(cfg, Scheme::Centralized)?,
        peak_ub_c: peak_power(cfg, Scheme::Centralized, method)?,
        avg_ub_d: average_power(cfg, Scheme::Decentralized)?,
        peak_ub_d: peak_power(cfg, Scheme::Decentralized, method)?,
    })
}
