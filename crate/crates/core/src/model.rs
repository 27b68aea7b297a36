//! System configuration, demand vectors and their reduction to demand classes.
//!
//! Users are indexed `1..=K` from the weakest channel to the strongest, and
//! files are indexed `1..=N`. Every other module works on these types.

use std::fmt;

use crate::combinatorics::UserSet;
use crate::error::{Error, Result};

/// Distance below which the global cache ratio `t = MK/N` is snapped to an integer.
pub const T_SNAP_TOLERANCE: f64 = 1e-9;

/// Parameters of a cache-aided degraded Gaussian broadcast channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    users: usize,
    files: usize,
    rate: f64,
    memory: f64,
    gains: Vec<f64>,
}

impl SystemConfig {
    /// Builds and validates a configuration.
    ///
    /// `gains` holds the squared channel gains `h_k^2`, which must already be
    /// sorted non-decreasing in the user index. They are never re-sorted.
    pub fn new(users: usize, files: usize, rate: f64, memory: f64, gains: Vec<f64>) -> Result<Self> {
        validate_config(SystemConfig {
            users,
            files,
            rate,
            memory,
            gains,
        })
    }

    /// Same as [`SystemConfig::new`] but takes the inverse gains `1/h_k^2`.
    pub fn from_inverse_gains(
        users: usize,
        files: usize,
        rate: f64,
        memory: f64,
        inverse_gains: &[f64],
    ) -> Result<Self> {
        let gains = inverse_gains.iter().map(|g| 1.0 / g).collect();
        Self::new(users, files, rate, memory, gains)
    }

    /// Copy of this configuration with a different cache size.
    pub fn with_memory(&self, memory: f64) -> Result<Self> {
        validate_config(SystemConfig {
            memory,
            ..self.clone()
        })
    }

    /// Number of users `K`.
    pub fn users(&self) -> usize {
        self.users
    }

    /// Library size `N`.
    pub fn files(&self) -> usize {
        self.files
    }

    /// File rate `R` in bits per channel use.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Normalized per-user cache size `M`, in files.
    pub fn memory(&self) -> f64 {
        self.memory
    }

    /// Squared channel gains, weakest user first.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Squared gain of user `k` (1-based).
    pub fn gain(&self, k: usize) -> f64 {
        self.gains[k - 1]
    }

    /// Cached fraction of every file, `M/N`.
    pub fn cached_fraction(&self) -> f64 {
        self.memory / self.files as f64
    }

    /// Normalized global cache capacity `t = MK/N`, snapped to the nearest
    /// integer when within [`T_SNAP_TOLERANCE`].
    pub fn t(&self) -> f64 {
        let t = self.memory * self.users as f64 / self.files as f64;
        let r = t.round();
        if (t - r).abs() < T_SNAP_TOLERANCE {
            r
        } else {
            t
        }
    }

    /// `t` as an integer when it is one.
    pub fn integer_t(&self) -> Option<usize> {
        let t = self.t();
        (t.fract() == 0.0).then_some(t as usize)
    }

    /// Number of users served by the worst-case demand, `min{N, K}`.
    pub fn max_distinct(&self) -> usize {
        self.users.min(self.files)
    }
}

/// Checks every invariant of a configuration, reporting the first violation.
pub fn validate_config(raw: SystemConfig) -> Result<SystemConfig> {
    if raw.users == 0 {
        return Err(Error::config("K", "user count must be positive"));
    }
    if raw.files == 0 {
        return Err(Error::config("N", "library size must be positive"));
    }
    if !(raw.rate.is_finite() && raw.rate > 0.0) {
        return Err(Error::config("R", format!("rate must be positive, got {}", raw.rate)));
    }
    if !raw.memory.is_finite() || raw.memory < 0.0 || raw.memory > raw.files as f64 {
        return Err(Error::config(
            "M",
            format!("cache size {} outside [0, {}]", raw.memory, raw.files),
        ));
    }
    if raw.gains.len() != raw.users {
        return Err(Error::config(
            "gains",
            format!("expected {} gains, got {}", raw.users, raw.gains.len()),
        ));
    }
    if let Some((i, g)) = raw
        .gains
        .iter()
        .enumerate()
        .find(|(_, g)| !(g.is_finite() && **g > 0.0))
    {
        return Err(Error::config(
            "gains",
            format!("gain {} of user {} is not a positive number", g, i + 1),
        ));
    }
    if let Some(i) = raw.gains.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::config(
            "gains",
            format!("gains not non-decreasing (user {} vs user {})", i + 1, i + 2),
        ));
    }
    Ok(raw)
}

/// The file requested by each user, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    /// Validates that every entry lies in `1..=files`.
    pub fn new(demands: Vec<usize>, files: usize) -> Result<Self> {
        if demands.is_empty() {
            return Err(Error::InvalidDemand("demand vector is empty".into()));
        }
        if let Some((k, d)) = demands
            .iter()
            .enumerate()
            .find(|(_, d)| **d == 0 || **d > files)
        {
            return Err(Error::InvalidDemand(format!(
                "user {} requests file {} outside [1, {}]",
                k + 1,
                d,
                files
            )));
        }
        Ok(DemandVector(demands))
    }

    /// Number of users `K`.
    pub fn users(&self) -> usize {
        self.0.len()
    }

    /// File requested by user `k` (1-based).
    pub fn file(&self, k: usize) -> usize {
        self.0[k - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Leader set and better-leader counts of this demand.
    pub fn class(&self) -> DemandClass {
        leader_set(self)
    }

    /// Calls `f` on every demand vector in `[files]^users`, in lexicographic order.
    pub fn for_each(users: usize, files: usize, mut f: impl FnMut(&DemandVector)) {
        let mut d = DemandVector(vec![1; users]);
        loop {
            f(&d);
            let mut i = users;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if d.0[i] < files {
                    d.0[i] += 1;
                    break;
                }
                d.0[i] = 1;
            }
        }
    }
}

impl fmt::Display for DemandVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// The leader set `U_d` of a demand together with, for every user `k`, the
/// number of leaders strictly above it, `N_{d,k}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DemandClass {
    leaders: Vec<usize>,
    better_leaders: Vec<usize>,
}

impl DemandClass {
    /// Builds the class for `users` users from a leader list.
    ///
    /// The list must be strictly increasing, contain user 1, and stay within `1..=users`.
    pub fn from_leaders(leaders: &[usize], users: usize) -> Result<Self> {
        if leaders.first() != Some(&1) {
            return Err(Error::InvalidDemand("leader set must contain user 1".into()));
        }
        if leaders.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDemand("leaders must be strictly increasing".into()));
        }
        if *leaders.last().unwrap() > users {
            return Err(Error::InvalidDemand(format!(
                "leader {} exceeds user count {}",
                leaders.last().unwrap(),
                users
            )));
        }
        Ok(Self::from_sorted_leaders(leaders.to_vec(), users))
    }

    /// Class whose leaders are the first `count` users, i.e. `[count]`.
    pub fn first_users(count: usize, users: usize) -> Result<Self> {
        let leaders: Vec<usize> = (1..=count).collect();
        Self::from_leaders(&leaders, users)
    }

    pub(crate) fn from_sorted_leaders(leaders: Vec<usize>, users: usize) -> Self {
        let mut better_leaders = vec![0; users];
        let mut above = leaders.len();
        let mut next = 0;
        for k in 1..=users {
            if next < leaders.len() && leaders[next] == k {
                next += 1;
                above -= 1;
            }
            better_leaders[k - 1] = above;
        }
        DemandClass {
            leaders,
            better_leaders,
        }
    }

    /// Leader user indices, increasing.
    pub fn leaders(&self) -> &[usize] {
        &self.leaders
    }

    /// Number of distinct demands `N_d`.
    pub fn n_distinct(&self) -> usize {
        self.leaders.len()
    }

    /// `N_{d,k}` for every `k`, stored at index `k - 1`.
    pub fn better_leaders(&self) -> &[usize] {
        &self.better_leaders
    }

    /// `N_{d,k}` for user `k` (1-based).
    pub fn better_leaders_of(&self, k: usize) -> usize {
        self.better_leaders[k - 1]
    }

    pub fn users(&self) -> usize {
        self.better_leaders.len()
    }

    pub fn is_leader(&self, k: usize) -> bool {
        self.leaders.binary_search(&k).is_ok()
    }

    /// Leaders as a bitmask set.
    pub fn leader_set(&self) -> UserSet {
        self.leaders.iter().copied().collect()
    }
}

impl fmt::Display for DemandClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.leader_set())
    }
}

/// Reduces a demand vector to its leader set: user `k` leads iff no weaker
/// user `m < k` requests the same file.
pub fn leader_set(d: &DemandVector) -> DemandClass {
    let mut leaders = Vec::new();
    for (i, file) in d.0.iter().enumerate() {
        if !d.0[..i].contains(file) {
            leaders.push(i + 1);
        }
    }
    DemandClass::from_sorted_leaders(leaders, d.users())
}
