//! Bit-exact simulation of centralized placement and coded delivery, and an
//! exact mass-model check of the decentralized scheme.
//!
//! Centralized placement at integer `t` splits every file into `C(K, t)`
//! equal subfiles `W_{i,T}`, one per `t`-subset `T` of users, and user `k`
//! caches every `W_{i,T}` with `k` in `T`. For each `(t+1)`-subset `C` the
//! coded packet is
//!
//! ```text
//! Q_C = XOR_{k in C} W_{d_k, C \ {k}}
//! ```
//!
//! Only packets reaching a leader are sent, on layer `min(C)`. A user who
//! needs a packet that was not sent rebuilds it from sent ones: with
//! `B = S ∪ U_d` and `G_B` the `N_d`-subsets of `B` whose users request
//! distinct files, the packets `Q_{B \ G}` over `G` in `G_B` XOR to zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;

use bitvec::prelude::*;
use itertools::Itertools;
use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::combinatorics::{all_subsets, binom, binom_usize, subsets_of_size, UserSet};
use crate::error::{Error, Result};
use crate::model::{leader_set, DemandClass, DemandVector, SystemConfig};
use crate::schemes::{centralized_rate_fractions, centralized_rates, decentralized_rates};

/// Bit block type used for files, subfiles and packets.
pub type Bits = BitVec<u64, Lsb0>;

/// Largest `K` and `N` accepted by the simulators.
pub const MAX_SIM_USERS: usize = 6;
pub const MAX_SIM_FILES: usize = 6;

/// Subfile length used when none is given.
pub const DEFAULT_SUBFILE_BITS: usize = 64;

/// Names one subfile `W_{file, holders}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubfileId {
    pub file: usize,
    pub holders: UserSet,
}

impl fmt::Display for SubfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W({},{})", self.file, self.holders)
    }
}

/// One XOR-coded transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub target_set: UserSet,
    pub payload: Bits,
    /// Weakest user in `target_set`, which sets the decoding power.
    pub layer: usize,
}

/// Packets keyed by target set.
pub type PacketMap = HashMap<UserSet, CodedPacket>;

/// Subfile table and user caches of a centralized placement.
#[derive(Debug, Clone)]
pub struct Placement {
    users: usize,
    t: usize,
    subfile_bits: usize,
    files: Vec<Bits>,
    /// `blocks[i][r]` is the subfile of file `i + 1` held by the `r`-th
    /// `t`-subset in colex order.
    blocks: Vec<Vec<Bits>>,
    caches: Vec<BTreeMap<SubfileId, Bits>>,
}

impl Placement {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn files(&self) -> usize {
        self.files.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn subfile_bits(&self) -> usize {
        self.subfile_bits
    }

    /// The original library file `i` (1-based).
    pub fn file(&self, i: usize) -> &Bits {
        &self.files[i - 1]
    }

    pub fn subfile(&self, id: SubfileId) -> &Bits {
        &self.blocks[id.file - 1][id.holders.colex_rank()]
    }

    /// Contents of user `k`'s cache.
    pub fn cache(&self, k: usize) -> &BTreeMap<SubfileId, Bits> {
        &self.caches[k - 1]
    }

    /// Total cached bits of user `k`.
    pub fn cache_bits(&self, k: usize) -> usize {
        self.cache(k).values().map(|b| b.len()).sum()
    }
}

/// Splits each file into `C(K, t)` subfiles and fills the caches.
pub fn place_centralized(users: usize, t: usize, files: &[Bits]) -> Result<Placement> {
    if users == 0 || users > MAX_SIM_USERS {
        return Err(Error::LimitExceeded {
            what: "K for simulation",
            requested: users,
            limit: MAX_SIM_USERS,
        });
    }
    if t > users {
        return Err(Error::config("t", format!("t = {t} exceeds K = {users}")));
    }
    let pieces = binom_usize(users, t);
    let file_bits = files.first().map_or(0, |f| f.len());
    if files.iter().any(|f| f.len() != file_bits) {
        return Err(Error::config("files", "files have different lengths"));
    }
    if !file_bits.is_multiple_of(pieces) {
        return Err(Error::Divisibility {
            bits: file_bits,
            multiple: pieces,
        });
    }
    let subfile_bits = file_bits / pieces;
    let blocks: Vec<Vec<Bits>> = files
        .iter()
        .map(|f| f.chunks(subfile_bits.max(1)).map(Bits::from_bitslice).collect())
        .map(|mut v: Vec<Bits>| {
            v.resize(pieces, Bits::new());
            v
        })
        .collect();
    let mut caches = vec![BTreeMap::new(); users];
    for holders in subsets_of_size(users, t) {
        for (i, file_blocks) in blocks.iter().enumerate() {
            let id = SubfileId {
                file: i + 1,
                holders,
            };
            for k in holders.iter() {
                caches[k - 1].insert(id, file_blocks[holders.colex_rank()].clone());
            }
        }
    }
    Ok(Placement {
        users,
        t,
        subfile_bits,
        files: files.to_vec(),
        blocks,
        caches,
    })
}

/// `Q_C` for any `(t+1)`-subset `C`, whether or not it would be sent.
pub fn coded_packet(target_set: UserSet, d: &DemandVector, placement: &Placement) -> CodedPacket {
    let mut payload = bitvec![u64, Lsb0; 0; placement.subfile_bits];
    for k in target_set.iter() {
        payload ^= placement.subfile(SubfileId {
            file: d.file(k),
            holders: target_set.without(k),
        });
    }
    CodedPacket {
        target_set,
        payload,
        layer: target_set.min().expect("target set is nonempty"),
    }
}

/// Packets sent for demand `d`: every `(t+1)`-subset reaching a leader, in colex order.
pub fn generate_packets(d: &DemandVector, placement: &Placement) -> Vec<CodedPacket> {
    let leaders = leader_set(d).leader_set();
    subsets_of_size(placement.users, placement.t + 1)
        .filter(|c| !c.is_disjoint(leaders))
        .map(|c| coded_packet(c, d, placement))
        .collect()
}

/// Target sets of the packets on each layer, `result[k - 1]` for layer `k`.
pub fn group_by_layer(packets: &[CodedPacket], users: usize) -> Vec<Vec<UserSet>> {
    let mut groups = vec![Vec::new(); users];
    for p in packets {
        groups[p.layer - 1].push(p.target_set);
    }
    groups
}

/// One line per packet: `layer,target_set,bit_length`, with the target set
/// written as users joined by `+`.
pub fn trace(packets: &[CodedPacket]) -> String {
    let mut out = String::new();
    for p in packets {
        let users = p.target_set.iter().join("+");
        writeln!(out, "{},{},{}", p.layer, users, p.payload.len()).unwrap();
    }
    out
}

/// `N_d`-subsets of `b` whose users request distinct files: one user per
/// requested file. Every requested file must have a requester in `b`.
fn distinct_demand_groups(b: UserSet, d: &DemandVector) -> Vec<UserSet> {
    let mut by_file: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 1..=d.users() {
        by_file.entry(d.file(k)).or_default();
    }
    for k in b.iter() {
        by_file.entry(d.file(k)).or_default().push(k);
    }
    by_file
        .into_values()
        .multi_cartesian_product()
        .map(|g| g.into_iter().collect())
        .collect()
}

/// Constituent target sets `B \ G` for rebuilding `Q_S`.
fn reconstruction_sources(s: UserSet, d: &DemandVector) -> Result<Vec<UserSet>> {
    let leaders = leader_set(d).leader_set();
    if s.is_empty() {
        return Err(Error::InvalidReconstruction("empty target set".into()));
    }
    if !s.is_disjoint(leaders) {
        return Err(Error::InvalidReconstruction(format!(
            "{s} contains a leader of {leaders}, so it is delivered directly"
        )));
    }
    let b = s.union(leaders);
    Ok(distinct_demand_groups(b, d)
        .into_iter()
        .filter(|&g| g != leaders)
        .map(|g| b.difference(g))
        .collect())
}

fn reconstruct_with<'a>(
    s: UserSet,
    d: &DemandVector,
    lookup: impl Fn(UserSet) -> Option<&'a CodedPacket>,
) -> Result<(CodedPacket, usize)> {
    let sources = reconstruction_sources(s, d)?;
    let b = s.union(leader_set(d).leader_set());
    let mut payload: Option<Bits> = None;
    for &target in &sources {
        let packet = lookup(target).ok_or_else(|| Error::MissingPacket {
            target: target.to_string(),
            dropped: b.difference(target).to_string(),
        })?;
        match payload.as_mut() {
            Some(acc) => *acc ^= &packet.payload,
            None => payload = Some(packet.payload.clone()),
        }
    }
    let payload = payload.ok_or_else(|| {
        Error::InvalidReconstruction(format!("no sent packet can rebuild {s}"))
    })?;
    let packet = CodedPacket {
        target_set: s,
        payload,
        layer: s.min().unwrap(),
    };
    Ok((packet, sources.len()))
}

/// Rebuilds the unsent packet `Q_S` as the XOR of sent packets `Q_{B \ G}`.
pub fn reconstruct_packet(s: UserSet, delivered: &PacketMap, d: &DemandVector) -> Result<CodedPacket> {
    reconstruct_with(s, d, |c| delivered.get(&c)).map(|(p, _)| p)
}

/// Whether `XOR_{G in G_B} Q_{B \ G}` is the zero block for `B ⊇ U_d`.
pub fn zero_sum_holds(b: UserSet, d: &DemandVector, placement: &Placement) -> bool {
    let leaders = leader_set(d).leader_set();
    assert!(leaders.is_subset(b), "B must contain every leader");
    let mut acc = bitvec![u64, Lsb0; 0; placement.subfile_bits];
    for g in distinct_demand_groups(b, d) {
        acc ^= &coded_packet(b.difference(g), d, placement).payload;
    }
    acc.not_any()
}

/// Decoding outcome of one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserOutcome {
    pub user: usize,
    pub decoded_ok: bool,
    /// SHA-256 of the recovered file, hex encoded.
    pub file_hash: String,
    /// Sent packets on layers at or below this user.
    pub packets_received: usize,
    /// Unsent packets this user rebuilt.
    pub packets_reconstructed: usize,
}

/// Outcome of [`verify_delivery`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryReport {
    pub seed: u64,
    pub t: usize,
    pub subfile_bits: usize,
    pub users: Vec<UserOutcome>,
    /// Packets sent on each layer.
    pub layer_packets: Vec<usize>,
    /// Sent bits per layer over file bits, in units of `R`.
    pub layer_rates: Vec<Ratio<u128>>,
    /// Whether `layer_rates` equals the analytic centralized rates exactly.
    pub rates_match: bool,
    pub packets_sent: usize,
    pub reconstructions: usize,
}

impl DeliveryReport {
    pub fn all_decoded(&self) -> bool {
        self.users.iter().all(|u| u.decoded_ok)
    }

    pub fn passed(&self) -> bool {
        self.all_decoded() && self.rates_match
    }
}

fn hash_bits(bits: &Bits) -> String {
    let mut hasher = Sha256::new();
    hasher.update((bits.len() as u64).to_le_bytes());
    for word in bits.as_raw_slice() {
        hasher.update(word.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Deterministic library of `files` random files of `bits` bits each.
pub fn random_library(files: usize, bits: usize, seed: u64) -> Vec<Bits> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..files)
        .map(|_| {
            let words = bits.div_ceil(64);
            let raw: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
            let mut f = Bits::from_vec(raw);
            f.truncate(bits);
            f
        })
        .collect()
}

/// Simulates placement and delivery at integer `t` with `DEFAULT_SUBFILE_BITS`.
pub fn verify_delivery(files: usize, d: &DemandVector, t: usize, seed: u64) -> Result<DeliveryReport> {
    verify_delivery_with_bits(files, d, t, seed, DEFAULT_SUBFILE_BITS)
}

/// Simulates placement and delivery and checks that every user recovers
/// its file bit for bit.
///
/// User `k` hears every sent packet on layers `1..=k` and rebuilds unsent
/// packets only from those.
pub fn verify_delivery_with_bits(
    files: usize,
    d: &DemandVector,
    t: usize,
    seed: u64,
    subfile_bits: usize,
) -> Result<DeliveryReport> {
    let users = d.users();
    if files == 0 || files > MAX_SIM_FILES {
        return Err(Error::LimitExceeded {
            what: "N for simulation",
            requested: files,
            limit: MAX_SIM_FILES,
        });
    }
    if let Some(&f) = d.as_slice().iter().find(|&&f| f > files) {
        return Err(Error::InvalidDemand(format!("file {f} outside [1, {files}]")));
    }
    let pieces = binom_usize(users, t);
    let library = random_library(files, subfile_bits * pieces, seed);
    let placement = place_centralized(users, t, &library)?;
    let packets = generate_packets(d, &placement);
    let sent: PacketMap = packets.iter().map(|p| (p.target_set, p.clone())).collect();

    let mut outcomes = Vec::with_capacity(users);
    let mut reconstructions = 0;
    for k in 1..=users {
        let cache = placement.cache(k);
        let heard = |c: UserSet| sent.get(&c).filter(|p| p.layer <= k);
        let mut rebuilt = 0;
        let mut recovered = Bits::with_capacity(subfile_bits * pieces);
        for holders in subsets_of_size(users, t) {
            let want = SubfileId {
                file: d.file(k),
                holders,
            };
            if holders.contains(k) {
                recovered.extend_from_bitslice(&cache[&want]);
                continue;
            }
            let undecodable = || Error::Undecodable {
                user: k,
                subfile: want,
            };
            let target = holders.with(k);
            let packet = match heard(target) {
                Some(p) => p.clone(),
                None => {
                    rebuilt += 1;
                    reconstruct_with(target, d, heard)
                        .map_err(|_| undecodable())?
                        .0
                }
            };
            let mut block = packet.payload;
            for j in target.iter().filter(|&j| j != k) {
                let side = SubfileId {
                    file: d.file(j),
                    holders: target.without(j),
                };
                block ^= cache.get(&side).ok_or_else(undecodable)?;
            }
            recovered.extend_from_bitslice(&block);
        }
        reconstructions += rebuilt;
        outcomes.push(UserOutcome {
            user: k,
            decoded_ok: recovered == *placement.file(d.file(k)),
            file_hash: hash_bits(&recovered),
            packets_received: packets.iter().filter(|p| p.layer <= k).count(),
            packets_reconstructed: rebuilt,
        });
    }

    let mut layer_packets = vec![0usize; users];
    for p in &packets {
        layer_packets[p.layer - 1] += 1;
    }
    let subfiles = binom(users as u64, t as u64)?;
    let layer_rates: Vec<Ratio<u128>> = layer_packets
        .iter()
        .map(|&n| Ratio::new(n as u128, subfiles))
        .collect();
    let rates_match = layer_rates == centralized_rate_fractions(&leader_set(d), t)?;
    Ok(DeliveryReport {
        seed,
        t,
        subfile_bits,
        users: outcomes,
        layer_packets,
        layer_rates,
        rates_match,
        packets_sent: packets.len(),
        reconstructions,
    })
}

/// Outcome of a delivery run at non-integer `t`, split between the two
/// neighbouring integer placements.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedDeliveryReport {
    pub low: DeliveryReport,
    pub high: Option<DeliveryReport>,
    /// Fraction of every file handled by the `floor(t)` placement.
    pub low_weight: f64,
    /// Combined rate per layer, in bits per channel use.
    pub layer_rates: Vec<f64>,
    /// Largest deviation of `layer_rates` from the analytic rates.
    pub max_rate_error: f64,
}

impl SharedDeliveryReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.low.all_decoded()
            && self.high.as_ref().is_none_or(|h| h.all_decoded())
            && self.max_rate_error <= tolerance
    }
}

/// Runs delivery at `t = MK/N` by memory sharing: a `floor(t) + 1 - t`
/// fraction of each file uses the `floor(t)` placement and the rest the
/// `floor(t) + 1` placement.
pub fn verify_delivery_memory_sharing(
    cfg: &SystemConfig,
    d: &DemandVector,
    seed: u64,
) -> Result<SharedDeliveryReport> {
    let t = cfg.t();
    let low_t = t.floor() as usize;
    let low_weight = low_t as f64 + 1.0 - t;
    let low = verify_delivery(cfg.files(), d, low_t, seed)?;
    let high = if low_weight < 1.0 {
        Some(verify_delivery(cfg.files(), d, low_t + 1, seed.wrapping_add(1))?)
    } else {
        None
    };
    let as_f64 = |r: &Ratio<u128>| *r.numer() as f64 / *r.denom() as f64;
    let layer_rates: Vec<f64> = (0..d.users())
        .map(|i| {
            let mut r = low_weight * as_f64(&low.layer_rates[i]);
            if let Some(h) = &high {
                r += (1.0 - low_weight) * as_f64(&h.layer_rates[i]);
            }
            r * cfg.rate()
        })
        .collect();
    let analytic = centralized_rates(&leader_set(d), cfg)?;
    let max_rate_error = layer_rates
        .iter()
        .zip(analytic.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(SharedDeliveryReport {
        low,
        high,
        low_weight,
        layer_rates,
        max_rate_error,
    })
}

/// Outcome of [`verify_decentralized_masses`].
#[derive(Debug, Clone, PartialEq)]
pub struct MassReport {
    /// Per-layer sent mass summed over enumerated packets.
    pub enumerated: Vec<f64>,
    /// Per-layer sent mass from binomial sums.
    pub binomial: Vec<f64>,
    /// Per-layer decentralized rates.
    pub analytic: Vec<f64>,
    pub max_error: f64,
    /// Layers where the three agree to within `1e-12` relative to `R`.
    pub mismatched_layers: Vec<usize>,
    /// Demand patterns checked for coverage, or `None` above the simulation limit.
    pub patterns_checked: Option<usize>,
    /// Whether every needed packet was sent or rebuildable at or below its user's layer.
    pub coverage_ok: bool,
}

impl MassReport {
    pub fn passed(&self) -> bool {
        self.mismatched_layers.is_empty() && self.coverage_ok
    }
}

const MASS_TOLERANCE: f64 = 1e-12;

/// Whether user `k` can obtain every packet `Q_{T ∪ {k}}`, `k ∉ T`, from
/// sent packets on layers `1..=k`.
fn decentralized_coverage(d: &DemandVector) -> bool {
    let users = d.users();
    let leaders = leader_set(d).leader_set();
    let heard = |c: UserSet, k: usize| !c.is_disjoint(leaders) && c.min().unwrap() <= k;
    (1..=users).all(|k| {
        all_subsets(users)
            .filter(|t| !t.contains(k))
            .all(|t| {
                let c = t.with(k);
                heard(c, k)
                    || reconstruction_sources(c, d)
                        .is_ok_and(|src| !src.is_empty() && src.iter().all(|&s| heard(s, k)))
            })
    })
}

/// Demand vectors with leader set exactly `class`: leaders get files
/// `1..=N_d` and every other user copies a leader below it.
fn class_representatives(class: &DemandClass) -> Vec<DemandVector> {
    let users = class.users();
    let leaders = class.leaders();
    let choices: Vec<Vec<usize>> = (1..=users)
        .map(|k| match leaders.iter().position(|&l| l == k) {
            Some(i) => vec![i + 1],
            None => (1..=leaders.len()).filter(|&i| leaders[i - 1] < k).collect(),
        })
        .collect();
    choices
        .into_iter()
        .multi_cartesian_product()
        .map(|files| DemandVector::new(files, leaders.len()).expect("files within range"))
        .collect()
}

/// Checks the decentralized layer rates against the exact fractional model,
/// where subfile `W_{i,S}` carries a `p^{|S|} (1 - p)^{K - |S|}` share of
/// file `i` and `p = M/N`.
pub fn verify_decentralized_masses(cfg: &SystemConfig, class: &DemandClass) -> Result<MassReport> {
    let users = cfg.users();
    if users > crate::combinatorics::MAX_ENUM_USERS {
        return Err(Error::LimitExceeded {
            what: "K for mass enumeration",
            requested: users,
            limit: crate::combinatorics::MAX_ENUM_USERS,
        });
    }
    let p = cfg.cached_fraction();
    let q = 1.0 - p;
    let r = cfg.rate();
    let leaders = class.leader_set();
    let mass = |holders: usize| p.powi(holders as i32) * q.powi((users - holders) as i32);

    let mut enumerated = vec![0.0; users];
    for s in all_subsets(users).skip(1) {
        if !s.is_disjoint(leaders) {
            enumerated[s.min().unwrap() - 1] += mass(s.len() - 1) * r;
        }
    }

    let binomial: Vec<f64> = (1..=users)
        .map(|k| {
            let above = users - k;
            let avoid = above - class.better_leaders_of(k);
            (0..=above)
                .map(|s| {
                    let count = if class.is_leader(k) {
                        binom_usize(above, s)
                    } else {
                        binom_usize(above, s) - binom_usize(avoid, s)
                    };
                    count as f64 * mass(s) * r
                })
                .sum()
        })
        .collect();

    let analytic = decentralized_rates(class, cfg)?.into_inner();
    let mut max_error: f64 = 0.0;
    let mut mismatched_layers = Vec::new();
    for k in 0..users {
        let err = (enumerated[k] - analytic[k])
            .abs()
            .max((binomial[k] - analytic[k]).abs());
        max_error = max_error.max(err);
        if err > MASS_TOLERANCE * r.max(1.0) {
            mismatched_layers.push(k + 1);
        }
    }

    let (patterns_checked, coverage_ok) = if users <= MAX_SIM_USERS {
        let reps = class_representatives(class);
        let ok = reps.iter().all(decentralized_coverage);
        (Some(reps.len()), ok)
    } else {
        (None, true)
    };

    Ok(MassReport {
        enumerated,
        binomial,
        analytic,
        max_error,
        mismatched_layers,
        patterns_checked,
        coverage_ok,
    })
}
