//! Per-user target rates of the centralized and decentralized delivery schemes.
//!
//! Layer `k` of the superposition code carries every coded packet whose
//! weakest recipient is user `k` and which reaches at least one leader. Its
//! rate depends on the demand only through the leader set.

use std::fmt;
use std::ops::Deref;

use num_rational::Ratio;

use crate::combinatorics::binom;
use crate::error::{Error, Result};
use crate::model::{DemandClass, SystemConfig};

/// Cache placement strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Centralized,
    Decentralized,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Centralized, Scheme::Decentralized];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Centralized => "centralized",
            Scheme::Decentralized => "decentralized",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Target rate of each layer, in bits per channel use, weakest user first.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    rates: Vec<f64>,
    scheme: Scheme,
}

impl RateVector {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.rates
    }
}

impl Deref for RateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.rates
    }
}

fn check_class(class: &DemandClass, cfg: &SystemConfig) -> Result<()> {
    if class.users() != cfg.users() {
        return Err(Error::InvalidDemand(format!(
            "class built for {} users used with K = {}",
            class.users(),
            cfg.users()
        )));
    }
    Ok(())
}

/// Numerator of user `k`'s share at integer cache ratio `t`, over `C(K, t)`.
fn packet_count(class: &DemandClass, k: usize, t: usize) -> Result<u128> {
    let users = class.users() as u64;
    let above = users - k as u64;
    let all = binom(above, t as u64)?;
    if class.is_leader(k) {
        Ok(all)
    } else {
        // packets of layer k that avoid every leader are not sent
        let skipped = binom(above - class.better_leaders_of(k) as u64, t as u64)?;
        Ok(all - skipped)
    }
}

/// Layer rates in units of `R` at an integer cache ratio `t`, as exact fractions.
///
/// Entry `k - 1` is the number of coded packets sent on layer `k` divided by
/// the number of subfiles per file, `C(K, t)`.
pub fn centralized_rate_fractions(class: &DemandClass, t: usize) -> Result<Vec<Ratio<u128>>> {
    let users = class.users();
    if t > users {
        return Err(Error::config("M", format!("t = {t} exceeds K = {users}")));
    }
    let subfiles = binom(users as u64, t as u64)?;
    (1..=users)
        .map(|k| Ok(Ratio::new(packet_count(class, k, t)?, subfiles)))
        .collect()
}

fn integer_t_rates(class: &DemandClass, t: usize) -> Result<Vec<f64>> {
    let users = class.users();
    let subfiles = binom(users as u64, t as u64)? as f64;
    (1..=users)
        .map(|k| Ok(packet_count(class, k, t)? as f64 / subfiles))
        .collect()
}

/// Layer rates of the centralized scheme, with memory sharing between
/// `floor(t)` and `floor(t) + 1` when `t` is not an integer.
pub fn centralized_rates(class: &DemandClass, cfg: &SystemConfig) -> Result<RateVector> {
    check_class(class, cfg)?;
    let t = cfg.t();
    let low = t.floor();
    let low_weight = low + 1.0 - t;
    let high_weight = t - low;
    let r = cfg.rate();
    let mut rates: Vec<f64> = integer_t_rates(class, low as usize)?
        .into_iter()
        .map(|x| x * low_weight * r)
        .collect();
    if high_weight > 0.0 {
        let high = integer_t_rates(class, low as usize + 1)?;
        for (rate, x) in rates.iter_mut().zip(high) {
            *rate += x * high_weight * r;
        }
    }
    Ok(RateVector {
        rates,
        scheme: Scheme::Centralized,
    })
}

/// Layer rates of the decentralized scheme.
///
/// With `q = 1 - M/N`, a leader `k` gets `q^k R` and any other user
/// `q^k (1 - q^{N_{d,k}}) R`.
pub fn decentralized_rates(class: &DemandClass, cfg: &SystemConfig) -> Result<RateVector> {
    check_class(class, cfg)?;
    let q = 1.0 - cfg.cached_fraction();
    let r = cfg.rate();
    let rates = (1..=cfg.users())
        .map(|k| {
            let base = q.powi(k as i32) * r;
            if class.is_leader(k) {
                base
            } else {
                base * (1.0 - q.powi(class.better_leaders_of(k) as i32))
            }
        })
        .collect();
    Ok(RateVector {
        rates,
        scheme: Scheme::Decentralized,
    })
}

/// Dispatches on `scheme`.
pub fn scheme_rates(class: &DemandClass, cfg: &SystemConfig, scheme: Scheme) -> Result<RateVector> {
    match scheme {
        Scheme::Centralized => centralized_rates(class, cfg),
        Scheme::Decentralized => decentralized_rates(class, cfg),
    }
}

/// The worst-case leader set `[min{N, K}]`.
pub fn worst_case_class(cfg: &SystemConfig) -> DemandClass {
    DemandClass::from_sorted_leaders((1..=cfg.max_distinct()).collect(), cfg.users())
}

/// Rates for the demand where the `min{N, K}` weakest users ask for distinct files.
pub fn worst_case_rates(cfg: &SystemConfig, scheme: Scheme) -> Result<RateVector> {
    scheme_rates(&worst_case_class(cfg), cfg, scheme)
}
