//! Exact binomials, user subsets, and demand-class enumeration with multiplicities.
//!
//! Averaging over all `N^K` demand vectors only needs one term per leader
//! set: every demand vector with the same leaders needs the same power. The
//! number of demand vectors that share a leader set `{u_1 = 1 < ... < u_n}`
//! is
//!
//! ```text
//! C(N, n) * n! * prod_{j=1..n} j^(u_{j+1} - u_j - 1),   u_{n+1} = K + 1
//! ```
//!
//! since a non-leader between `u_j` and `u_{j+1}` can repeat any of the `j`
//! files already requested by weaker leaders.

use std::fmt;
use std::iter::FromIterator;

use crate::error::{Error, Result};
use crate::model::DemandClass;

/// Largest user count for exact class enumeration (`2^(K-1)` classes).
pub const MAX_ENUM_USERS: usize = 30;

/// Largest user count a [`UserSet`] can hold.
pub const MAX_SET_USERS: usize = 63;

/// A set of users stored as a bitmask, bit `k - 1` standing for user `k`.
///
/// Numeric order of the masks is colexicographic order of the sets, which is
/// the fixed subset order used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct UserSet(u64);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn from_bits(bits: u64) -> Self {
        UserSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(k: usize) -> Self {
        UserSet(1 << (k - 1))
    }

    /// The first `count` users, `[count]`.
    pub fn first(count: usize) -> Self {
        if count == 0 {
            UserSet(0)
        } else {
            UserSet(u64::MAX >> (64 - count))
        }
    }

    pub fn contains(self, k: usize) -> bool {
        (1..=64).contains(&k) && self.0 & (1 << (k - 1)) != 0
    }

    pub fn with(self, k: usize) -> Self {
        UserSet(self.0 | (1 << (k - 1)))
    }

    pub fn without(self, k: usize) -> Self {
        UserSet(self.0 & !(1 << (k - 1)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Smallest (weakest) user in the set.
    pub fn min(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize + 1)
    }

    pub fn union(self, other: Self) -> Self {
        UserSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        UserSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        UserSet(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Users in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let k = bits.trailing_zeros() as usize + 1;
                bits &= bits - 1;
                Some(k)
            }
        })
    }

    /// Position of this set among all sets of the same size in colex order.
    pub fn colex_rank(self) -> usize {
        self.iter()
            .enumerate()
            .map(|(i, k)| binom_usize(k - 1, i + 1))
            .sum()
    }
}

impl FromIterator<usize> for UserSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(UserSet(0), |s, k| s.with(k))
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}

/// All `size`-subsets of `[users]` in colex order.
pub fn subsets_of_size(users: usize, size: usize) -> impl Iterator<Item = UserSet> {
    assert!(users <= MAX_SET_USERS, "at most {MAX_SET_USERS} users");
    let limit = 1u64 << users;
    let mut next = if size > users { None } else { Some(UserSet::first(size).0) };
    std::iter::from_fn(move || {
        let x = next?;
        next = if x == 0 {
            None
        } else {
            // Gosper's hack: next integer with the same popcount
            let c = x & x.wrapping_neg();
            let r = x + c;
            let y = (((r ^ x) >> 2) / c) | r;
            (y < limit).then_some(y)
        };
        Some(UserSet(x))
    })
}

/// All subsets of `[users]` (including the empty set) in colex order.
pub fn all_subsets(users: usize) -> impl Iterator<Item = UserSet> {
    assert!(users <= MAX_SET_USERS, "at most {MAX_SET_USERS} users");
    (0..1u64 << users).map(UserSet)
}

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binom(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc = C(n, i); acc * (n - i) is divisible by i + 1, so split the
        // divisor between the two factors to keep the product small
        let d = (i + 1) as u128;
        let g = gcd(acc, d);
        let factor = (n - i) as u128 / (d / g);
        acc = (acc / g)
            .checked_mul(factor)
            .ok_or_else(|| Error::Overflow(format!("C({n}, {k})")))?;
    }
    Ok(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `binom` for the small arguments that index subsets; panics on overflow.
pub(crate) fn binom_usize(n: usize, k: usize) -> usize {
    let b = binom(n as u64, k as u64).expect("binomial overflow");
    usize::try_from(b).expect("binomial overflow")
}

/// A demand class with the number of demand vectors it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeight {
    pub class: DemandClass,
    /// Exact number of demand vectors in the class, `None` if it exceeds `u128`.
    pub count: Option<u128>,
    /// `count / N^K`.
    pub probability: f64,
}

/// Exponents `u_{j+1} - u_j - 1` of the class multiplicity, for `j = 1..=N_d`.
fn gap_exponents(class: &DemandClass) -> impl Iterator<Item = (usize, usize)> + '_ {
    let leaders = class.leaders();
    let k = class.users();
    (0..leaders.len()).map(move |i| {
        let next = leaders.get(i + 1).copied().unwrap_or(k + 1);
        (i + 1, next - leaders[i] - 1)
    })
}

/// Number of demand vectors in `[N]^K` whose leader set is `class`.
pub fn class_multiplicity(class: &DemandClass, users: usize, files: usize) -> Result<u128> {
    if class.users() != users {
        return Err(Error::InvalidDemand(format!(
            "class built for {} users used with K = {}",
            class.users(),
            users
        )));
    }
    let n_d = class.n_distinct();
    if n_d > files {
        return Ok(0);
    }
    let overflow = || Error::Overflow(format!("multiplicity of class {class}"));
    let mut count: u128 = 1;
    for i in 0..n_d {
        count = count.checked_mul((files - i) as u128).ok_or_else(overflow)?;
    }
    for (j, e) in gap_exponents(class) {
        let factor = (j as u128).checked_pow(e as u32).ok_or_else(overflow)?;
        count = count.checked_mul(factor).ok_or_else(overflow)?;
    }
    Ok(count)
}

/// Natural log of the class probability, computed without exact integers.
pub fn class_ln_probability(class: &DemandClass, files: usize) -> f64 {
    let n_d = class.n_distinct();
    if n_d > files {
        return f64::NEG_INFINITY;
    }
    let falling: f64 = (0..n_d).map(|i| ((files - i) as f64).ln()).sum();
    let gaps: f64 = gap_exponents(class)
        .map(|(j, e)| e as f64 * (j as f64).ln())
        .sum();
    falling + gaps - class.users() as f64 * (files as f64).ln()
}

/// Every leader set that some demand in `[N]^K` produces, with its weight.
///
/// Classes come in binary counting order of the subset of `[2..K]` that
/// joins user 1.
pub fn enumerate_classes(users: usize, files: usize) -> Result<Vec<ClassWeight>> {
    if users == 0 || files == 0 {
        return Err(Error::config("K", "enumeration needs K >= 1 and N >= 1"));
    }
    if users > MAX_ENUM_USERS {
        return Err(Error::LimitExceeded {
            what: "K",
            requested: users,
            limit: MAX_ENUM_USERS,
        });
    }
    let total = (files as u128).checked_pow(users as u32);
    let max_leaders = users.min(files);
    let mut out = Vec::new();
    for rest in 0..1u64 << (users - 1) {
        if rest.count_ones() as usize + 1 > max_leaders {
            continue;
        }
        let leaders: Vec<usize> = std::iter::once(1)
            .chain((0..users - 1).filter(|b| rest >> b & 1 == 1).map(|b| b + 2))
            .collect();
        let class = DemandClass::from_sorted_leaders(leaders, users);
        let count = class_multiplicity(&class, users, files).ok();
        let probability = match (count, total) {
            (Some(c), Some(t)) => c as f64 / t as f64,
            _ => class_ln_probability(&class, files).exp(),
        };
        out.push(ClassWeight {
            class,
            count,
            probability,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{leader_set, DemandVector};
    use std::collections::BTreeMap;

    /// Groups all of `[N]^K` by leader set, as (leaders, count) pairs.
    fn brute_force_classes(users: usize, files: usize) -> BTreeMap<Vec<usize>, u128> {
        let mut map = BTreeMap::new();
        DemandVector::for_each(users, files, |d| {
            *map.entry(leader_set(d).leaders().to_vec()).or_insert(0) += 1;
        });
        map
    }

    fn class(leaders: &[usize], users: usize) -> DemandClass {
        DemandClass::from_leaders(leaders, users).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2).unwrap(), 10);
        assert_eq!(binom(3, 5).unwrap(), 0);
        assert_eq!(binom(0, 0).unwrap(), 1);
        assert_eq!(binom(60, 30).unwrap(), 118264581564861424);
        assert_eq!(binom(130, 65).unwrap(), 95067625827960698145584333020095113100);
    }

    #[test]
    fn binomial_overflow_is_reported() {
        assert!(matches!(binom(200, 100), Err(Error::Overflow(_))));
    }

    #[test]
    fn multiplicities_match_brute_force_small() {
        // K=2, N=2: {1} -> 2, {1,2} -> 2
        assert_eq!(class_multiplicity(&class(&[1], 2), 2, 2).unwrap(), 2);
        assert_eq!(class_multiplicity(&class(&[1, 2], 2), 2, 2).unwrap(), 2);
        // K=3, N=2: {1} -> 2, {1,2} -> 4, {1,3} -> 2, {1,2,3} impossible
        assert_eq!(class_multiplicity(&class(&[1], 3), 3, 2).unwrap(), 2);
        assert_eq!(class_multiplicity(&class(&[1, 2], 3), 3, 2).unwrap(), 4);
        assert_eq!(class_multiplicity(&class(&[1, 3], 3), 3, 2).unwrap(), 2);
        assert_eq!(class_multiplicity(&class(&[1, 2, 3], 3), 3, 2).unwrap(), 0);
        let bf = brute_force_classes(3, 2);
        assert_eq!(bf[&vec![1]], 2);
        assert_eq!(bf[&vec![1, 2]], 4);
        assert_eq!(bf[&vec![1, 3]], 2);
    }

    #[test]
    fn single_user_multiplicity_is_n() {
        for n in 1..10 {
            assert_eq!(class_multiplicity(&class(&[1], 1), 1, n).unwrap(), n as u128);
        }
    }

    #[test]
    fn enumeration_partitions_demand_space() {
        for k in 1..=4 {
            for n in 1..=4 {
                let classes = enumerate_classes(k, n).unwrap();
                let got: BTreeMap<Vec<usize>, u128> = classes
                    .iter()
                    .map(|w| (w.class.leaders().to_vec(), w.count.unwrap()))
                    .collect();
                assert_eq!(got, brute_force_classes(k, n), "K={k} N={n}");
                let p: f64 = classes.iter().map(|w| w.probability).sum();
                assert!((p - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let c = enumerate_classes(2, 2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].class.leaders(), c[0].count), (&[1][..], Some(2)));
        assert_eq!((c[1].class.leaders(), c[1].count), (&[1, 2][..], Some(2)));

        let c = enumerate_classes(3, 1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].count, Some(1));

        let c = enumerate_classes(5, 8).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c.iter().map(|w| w.count.unwrap()).sum::<u128>(), 32768);
    }

    #[test]
    fn enumeration_order_is_binary_counting() {
        let c = enumerate_classes(3, 3).unwrap();
        let leaders: Vec<&[usize]> = c.iter().map(|w| w.class.leaders()).collect();
        assert_eq!(leaders, vec![&[1][..], &[1, 2], &[1, 3], &[1, 2, 3]]);
    }

    #[test]
    fn enumeration_limit() {
        assert!(matches!(
            enumerate_classes(31, 2),
            Err(Error::LimitExceeded { limit: 30, .. })
        ));
    }

    #[test]
    fn log_probabilities_for_huge_libraries() {
        // 10^40 demand vectors for K = 20, N = 100 overflows nothing, but
        // K = 20, N = 10^6 does: N^K = 10^120
        let classes = enumerate_classes(20, 1_000_000).unwrap();
        assert!(classes.iter().all(|w| w.probability.is_finite()));
        let p: f64 = classes.iter().map(|w| w.probability).sum();
        assert!((p - 1.0).abs() < 1e-12, "{p}");
        let cw = enumerate_classes(6, 9).unwrap();
        for w in &cw {
            let ln = class_ln_probability(&w.class, 9);
            assert!((ln.exp() - w.probability).abs() < 1e-14);
        }
    }

    #[test]
    fn subset_iteration_is_colex() {
        let sets: Vec<String> = subsets_of_size(4, 2).map(|s| s.to_string()).collect();
        assert_eq!(
            sets,
            ["{1,2}", "{1,3}", "{2,3}", "{1,4}", "{2,4}", "{3,4}"]
        );
        for (i, s) in subsets_of_size(6, 3).enumerate() {
            assert_eq!(s.colex_rank(), i);
        }
        assert_eq!(subsets_of_size(3, 0).collect::<Vec<_>>(), vec![UserSet::EMPTY]);
        assert_eq!(subsets_of_size(3, 4).count(), 0);
        assert_eq!(subsets_of_size(5, 5).count(), 1);
        assert_eq!(all_subsets(4).count(), 16);
    }

    #[test]
    fn user_set_ops() {
        let s: UserSet = [1, 3, 4].into_iter().collect();
        assert_eq!(s.len(), 3);
        assert_eq!(s.min(), Some(1));
        assert!(s.contains(3) && !s.contains(2));
        assert_eq!(s.without(1).min(), Some(3));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 3, 4]);
        assert_eq!(UserSet::first(3).to_string(), "{1,2,3}");
        assert!(UserSet::singleton(2).is_disjoint(s));
    }
}
