//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use cachepower::bounds::{convexity_probe, gaps, lower_bound_peak};
use cachepower::delivery::{
    generate_packets, group_by_layer, place_centralized, random_library, reconstruct_packet,
    verify_delivery, PacketMap, SubfileId,
};
use cachepower::power::{average_power, class_power, closed_form_peak, min_power, peak_maximizer, peak_power};
use cachepower::runspec::parse_spec;
use cachepower::schemes::{centralized_rate_fractions, worst_case_class};
use cachepower::sweep::{audit_rows, sweep_rows};
use cachepower::{leader_set, DemandVector, PeakMethod, Scheme, SystemConfig, UserSet};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, f64);

fn inverse_gains(k: usize) -> Vec<f64> {
    (0..k).map(|i| 2.0 - 0.2 * i as f64).collect()
}

fn cfg(k: usize, n: usize, m: f64) -> SystemConfig {
    SystemConfig::from_inverse_gains(k, n, 1.0, m, &inverse_gains(k)).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn set(users: &[usize]) -> UserSet {
    users.iter().copied().collect()
}

fn spec_text(k: usize, n: usize, grid: &str) -> String {
    let inv: Vec<String> = inverse_gains(k).iter().map(|x| x.to_string()).collect();
    format!("K={k}\nN={n}\ngains_inv={}\nm_grid={grid}\n", inv.join(","))
}

fn zero_memory_anchor() -> Outcome {
    let want = 1294.8;
    for n in [5, 8, 20] {
        let c = cfg(5, n, 0.0);
        let values = [
            ("peak_c", peak_power(&c, Scheme::Centralized, PeakMethod::Enumerate).map_err(|e| e.to_string())?),
            ("peak_c closed", peak_power(&c, Scheme::Centralized, PeakMethod::ClosedForm).unwrap()),
            ("peak_d", peak_power(&c, Scheme::Decentralized, PeakMethod::Enumerate).map_err(|e| e.to_string())?),
            ("peak_d closed", peak_power(&c, Scheme::Decentralized, PeakMethod::ClosedForm).unwrap()),
            ("peak_lb", lower_bound_peak(&c).map_err(|e| e.to_string())?),
        ];
        for (name, v) in values {
            if rel(v, want) > 1e-9 {
                return Err(format!("N={n}: {name} = {v}, expected {want}"));
            }
        }
    }
    let start = Instant::now();
    let c = cfg(5, 8, 0.0);
    let _ = peak_power(&c, Scheme::Centralized, PeakMethod::ClosedForm).unwrap();
    let _ = peak_power(&c, Scheme::Decentralized, PeakMethod::ClosedForm).unwrap();
    let _ = lower_bound_peak(&c).unwrap();
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() > 1e-3 {
        return Err(format!("closed-form anchor took {elapsed:?}"));
    }
    Ok(format!("all equal 1294.8 for N in {{5,8,20}}, closed forms in {elapsed:?}"))
}

fn gap_below_two() -> Outcome {
    let mut max_avg: f64 = 0.0;
    let mut max_peak: f64 = 0.0;
    for step in 0..=32 {
        let p = gaps(&cfg(5, 8, step as f64 * 0.25)).map_err(|e| e.to_string())?;
        max_avg = max_avg.max(p.gap_avg_c.unwrap_or(0.0));
        max_peak = max_peak.max(p.gap_peak_c.unwrap_or(0.0));
    }
    let detail = format!("max avg gap {max_avg:.6}, max peak gap {max_peak:.6}");
    if max_avg < 2.0 && max_peak < 2.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn brute_force_average() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for k in 1..=4 {
        for n in 1..=4 {
            for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let c = cfg(k, n, frac * n as f64);
                for s in Scheme::ALL {
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    DemandVector::for_each(k, n, |d| {
                        sum += class_power(&leader_set(d), &c, s).unwrap().total;
                        count += 1;
                    });
                    let brute = sum / count as f64;
                    let via_classes = average_power(&c, s).map_err(|e| e.to_string())?;
                    let err = rel(via_classes, brute);
                    if err > 1e-12 {
                        return Err(format!("K={k} N={n} M={} {s}: {via_classes} vs {brute}", c.memory()));
                    }
                    worst = worst.max(err);
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} cases, max relative error {worst:.2e}"))
}

fn worst_case_demand() -> Outcome {
    let mut cases = 0;
    let mut ties = 0;
    let mut shortfall: f64 = 0.0;
    for k in 1..=5 {
        for n in 1..=5 {
            for step in 0..=10 {
                let c = cfg(k, n, n as f64 * step as f64 / 10.0);
                for s in Scheme::ALL {
                    let (argmax, max) = peak_maximizer(&c, s).map_err(|e| e.to_string())?;
                    let worst = worst_case_class(&c);
                    let at_worst = class_power(&worst, &c, s).unwrap().total;
                    // ties (e.g. all powers zero at M = N) admit several maximizers;
                    // the worst-case class must attain the maximum
                    if at_worst < max && rel(at_worst, max) > 1e-9 {
                        return Err(format!(
                            "K={k} N={n} M={} {s}: class {argmax} needs {max}, {worst} needs {at_worst}",
                            c.memory()
                        ));
                    }
                    if argmax != worst {
                        ties += 1;
                        shortfall = shortfall.max(rel(at_worst, max));
                    }
                    let closed = closed_form_peak(&c, s);
                    if rel(closed, max) > 1e-9 {
                        return Err(format!(
                            "K={k} N={n} M={} {s}: closed form {closed} vs enumerated {max}",
                            c.memory()
                        ));
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!(
        "{cases} cases, {ties} with tied maximizers, largest tie gap {shortfall:.1e}"
    ))
}

fn bit_exact_delivery() -> Outcome {
    let mut runs = 0;
    let mut users_ok = 0;
    let mut failures = Vec::new();
    for k in 1..=4 {
        for n in 1..=4 {
            for t in 0..=k {
                DemandVector::for_each(k, n, |d| {
                    runs += 1;
                    match verify_delivery(n, d, t, 2024) {
                        Ok(r) => {
                            users_ok += r.users.iter().filter(|u| u.decoded_ok).count();
                            let exact = centralized_rate_fractions(&leader_set(d), t).unwrap();
                            if !r.all_decoded() || r.layer_rates != exact {
                                failures.push(format!("K={k} N={n} t={t} d={d}"));
                            }
                        }
                        Err(e) => failures.push(format!("K={k} N={n} t={t} d={d}: {e}")),
                    }
                });
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{runs} runs, {users_ok} users decoded"))
    } else {
        Err(format!("{} of {runs} runs failed, first: {}", failures.len(), failures[0]))
    }
}

fn worked_example() -> Outcome {
    let d = DemandVector::new(vec![1, 2, 1, 1, 3], 3).unwrap();
    let placement = place_centralized(5, 1, &random_library(3, 5 * 256, 99)).map_err(|e| e.to_string())?;
    let packets = generate_packets(&d, &placement);
    let expected_sets = [
        set(&[1, 2]),
        set(&[1, 3]),
        set(&[1, 4]),
        set(&[1, 5]),
        set(&[2, 3]),
        set(&[2, 4]),
        set(&[2, 5]),
        set(&[3, 5]),
        set(&[4, 5]),
    ];
    let mut sent: Vec<UserSet> = packets.iter().map(|p| p.target_set).collect();
    sent.sort();
    let mut want = expected_sets.to_vec();
    want.sort();
    if sent != want {
        return Err(format!("sent sets {sent:?}"));
    }
    for p in &packets {
        let mut direct = cachepower::delivery::Bits::repeat(false, placement.subfile_bits());
        for k in p.target_set.iter() {
            direct ^= placement.subfile(SubfileId {
                file: d.file(k),
                holders: p.target_set.without(k),
            });
        }
        if p.payload != direct || p.layer != p.target_set.min().unwrap() {
            return Err(format!("packet {} differs from its XOR definition", p.target_set));
        }
    }
    let groups = group_by_layer(&packets, 5);
    let want_groups = vec![
        vec![set(&[1, 2]), set(&[1, 3]), set(&[1, 4]), set(&[1, 5])],
        vec![set(&[2, 3]), set(&[2, 4]), set(&[2, 5])],
        vec![set(&[3, 5])],
        vec![set(&[4, 5])],
        vec![],
    ];
    if groups != want_groups {
        return Err(format!("layer groups {groups:?}"));
    }
    let map: PacketMap = packets.iter().map(|p| (p.target_set, p.clone())).collect();
    let rebuilt = reconstruct_packet(set(&[3, 4]), &map, &d).map_err(|e| e.to_string())?;
    let xor = map[&set(&[1, 3])].payload.clone() ^ &map[&set(&[1, 4])].payload;
    let mut direct = placement.subfile(SubfileId { file: 1, holders: set(&[4]) }).clone();
    direct ^= placement.subfile(SubfileId { file: 1, holders: set(&[3]) });
    if rebuilt.payload != xor || rebuilt.payload != direct {
        return Err("Q_{3,4} is not Q_{1,3} xor Q_{1,4}".into());
    }
    let report = verify_delivery(3, &d, 1, 7).map_err(|e| e.to_string())?;
    let rates = [4, 3, 1, 1, 0].map(|x| Ratio::new(x, 5));
    if !report.all_decoded() || report.layer_rates != rates {
        return Err(format!("delivery report {report:?}"));
    }
    Ok("9 packets, layer groups match, layer 5 empty, {3,4} rebuilt from {1,3} and {1,4}".into())
}

fn ordering_and_monotonicity() -> Outcome {
    let mut grids = vec![spec_text(5, 8, "0:0.25:8")];
    for k in 1..=5 {
        for n in 1..=5 {
            grids.push(spec_text(k, n, &format!("0:{}:{n}", n as f64 / 10.0)));
            if k <= 4 && n <= 4 {
                let q = n as f64 / 4.0;
                grids.push(spec_text(k, n, &format!("0,{q},{},{},{n}", 2.0 * q, 3.0 * q)));
            }
        }
    }
    let mut points = 0;
    for text in &grids {
        let spec = parse_spec(text).map_err(|e| e.to_string())?;
        let rows = sweep_rows(&spec).map_err(|e| e.to_string())?;
        audit_rows(&rows).map_err(|e| format!("{}: {e}", text.replace('\n', " ")))?;
        points += rows.len();
    }
    Ok(format!("{} grids, {points} points", grids.len()))
}

fn convexity() -> Outcome {
    let gains: Vec<f64> = inverse_gains(5).iter().map(|x| 1.0 / x).collect();
    let mut worst = f64::NEG_INFINITY;
    for dim in 1..=5 {
        let r = convexity_probe(dim, &gains, 10_000, 1000 + dim as u64, 1.0);
        if !r.passed() {
            return Err(format!("dim {dim}: {} violations, max excess {}", r.violations, r.max_excess));
        }
        worst = worst.max(r.max_excess);
    }
    Ok(format!("5 x 10000 trials, 0 violations, max excess {worst:.3e}"))
}

fn power_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_sum: f64 = 0.0;
    for trial in 0..1000 {
        let k = rng.random_range(1..=8);
        let rates: Vec<f64> = (0..k)
            .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..2.0) })
            .collect();
        let mut gains: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..5.0)).collect();
        gains.sort_by(f64::total_cmp);
        let p = min_power(&rates, &gains);
        let sum: f64 = p.layer_shares.iter().sum();
        let err = if p.total == 0.0 { sum.abs() } else { rel(sum, p.total) };
        if err > 1e-9 {
            return Err(format!("trial {trial}: shares sum {sum}, total {}", p.total));
        }
        worst_sum = worst_sum.max(err);
        for layer in 0..k {
            let above: f64 = p.layer_shares[layer + 1..].iter().sum();
            for user in layer..k {
                let sinr = gains[user] * p.layer_shares[layer] / (1.0 + gains[user] * above);
                let capacity = 0.5 * (1.0 + sinr).log2();
                if capacity < rates[layer] - 1e-9 {
                    return Err(format!(
                        "trial {trial}: layer {} gives user {} capacity {capacity} < {}",
                        layer + 1,
                        user + 1,
                        rates[layer]
                    ));
                }
            }
            if (rates[layer] == 0.0) != (p.layer_shares[layer] == 0.0) {
                return Err(format!("trial {trial}: layer {} share/rate zero mismatch", layer + 1));
            }
        }
    }
    Ok(format!("1000 vectors, max share-sum error {worst_sum:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("zero-memory anchor", zero_memory_anchor, 1.0),
        ("centralized gap below 2", gap_below_two, 1.0),
        ("class average equals brute force", brute_force_average, 10.0),
        ("worst-case demand class", worst_case_demand, 30.0),
        ("bit-exact delivery", bit_exact_delivery, 60.0),
        ("worked delivery example", worked_example, 10.0),
        ("bound ordering and monotonicity", ordering_and_monotonicity, 60.0),
        ("convexity probe", convexity, 10.0),
        ("power engine identity", power_identity, 10.0),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(detail) if secs > budget => Err(format!("{detail}; took {secs:.2}s, budget {budget}s")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}; {secs:.3}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({detail}; {secs:.3}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
