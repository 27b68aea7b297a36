//! Cache-size sweeps to CSV and the exhaustive verification driver.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bounds::{gap, lower_bound_average, lower_bound_peak};
use crate::combinatorics::enumerate_classes;
use crate::delivery::verify_delivery;
use crate::delivery::verify_decentralized_masses;
use crate::error::{Error, Result};
use crate::model::DemandVector;
use crate::power::{average_power, peak_power, PeakMethod};
use crate::runspec::RunSpec;
use crate::schemes::Scheme;

pub const CSV_HEADER: &str =
    "M,avg_ub_c,peak_ub_c,avg_ub_d,peak_ub_d,avg_lb,peak_lb,gap_avg_c,gap_avg_d,gap_peak_c,gap_peak_d";

/// Relative slack allowed by the ordering audit.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// One cache size of a sweep. Columns not requested are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub memory: f64,
    pub avg_ub_c: Option<f64>,
    pub peak_ub_c: Option<f64>,
    pub avg_ub_d: Option<f64>,
    pub peak_ub_d: Option<f64>,
    pub avg_lb: Option<f64>,
    pub peak_lb: Option<f64>,
    pub gap_avg_c: Option<f64>,
    pub gap_avg_d: Option<f64>,
    pub gap_peak_c: Option<f64>,
    pub gap_peak_d: Option<f64>,
}

impl SweepRow {
    fn values(&self) -> [Option<f64>; 11] {
        [
            Some(self.memory),
            self.avg_ub_c,
            self.peak_ub_c,
            self.avg_ub_d,
            self.peak_ub_d,
            self.avg_lb,
            self.peak_lb,
            self.gap_avg_c,
            self.gap_avg_d,
            self.gap_peak_c,
            self.gap_peak_d,
        ]
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..DIGITS).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x))
    }
}

fn row_at(spec: &RunSpec, memory: f64) -> Result<SweepRow> {
    let cfg = spec.config_at(memory)?;
    let method = PeakMethod::default_for(cfg.users());
    let ub = |scheme| -> Result<(Option<f64>, Option<f64>)> {
        if spec.has_scheme(scheme) {
            Ok((
                Some(average_power(&cfg, scheme)?),
                Some(peak_power(&cfg, scheme, method)?),
            ))
        } else {
            Ok((None, None))
        }
    };
    let (avg_ub_c, peak_ub_c) = ub(Scheme::Centralized)?;
    let (avg_ub_d, peak_ub_d) = ub(Scheme::Decentralized)?;
    let (avg_lb, peak_lb) = if spec.compute_lb {
        (Some(lower_bound_average(&cfg)?), Some(lower_bound_peak(&cfg)?))
    } else {
        (None, None)
    };
    let ratio = |u: Option<f64>, l: Option<f64>| -> Result<Option<f64>> {
        match (u, l) {
            (Some(u), Some(l)) => gap(u, l),
            _ => Ok(None),
        }
    };
    Ok(SweepRow {
        memory,
        avg_ub_c,
        peak_ub_c,
        avg_ub_d,
        peak_ub_d,
        avg_lb,
        peak_lb,
        gap_avg_c: ratio(avg_ub_c, avg_lb)?,
        gap_avg_d: ratio(avg_ub_d, avg_lb)?,
        gap_peak_c: ratio(peak_ub_c, peak_lb)?,
        gap_peak_d: ratio(peak_ub_d, peak_lb)?,
    })
}

/// Computes every grid point, in grid order.
pub fn sweep_rows(spec: &RunSpec) -> Result<Vec<SweepRow>> {
    spec.m_grid
        .par_iter()
        .map(|&m| {
            row_at(spec, m).map_err(|e| Error::AtMemory {
                memory: m,
                source: Box::new(e),
            })
        })
        .collect()
}

fn le(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a <= b + AUDIT_TOLERANCE * a.abs().max(b.abs()),
        _ => true,
    }
}

/// Checks bound ordering at every row and monotonicity along the grid.
pub fn audit_rows(rows: &[SweepRow]) -> Result<()> {
    let fail = |m: f64, what: &str| Err(Error::Inconsistent(format!("at M = {m}: {what}")));
    for r in rows {
        let checks = [
            (r.avg_lb, r.avg_ub_c, "avg_lb <= avg_ub_c"),
            (r.avg_ub_c, r.avg_ub_d, "avg_ub_c <= avg_ub_d"),
            (r.peak_lb, r.peak_ub_c, "peak_lb <= peak_ub_c"),
            (r.peak_ub_c, r.peak_ub_d, "peak_ub_c <= peak_ub_d"),
            (r.avg_ub_c, r.peak_ub_c, "avg_ub_c <= peak_ub_c"),
            (r.avg_ub_d, r.peak_ub_d, "avg_ub_d <= peak_ub_d"),
            (r.avg_lb, r.peak_lb, "avg_lb <= peak_lb"),
        ];
        for (a, b, what) in checks {
            if !le(a, b) {
                return fail(r.memory, what);
            }
        }
        // skip the (lb, ub) pair when only one side is present
        if r.avg_lb.is_some() && r.avg_ub_d.is_some() && !le(r.avg_lb, r.avg_ub_d) {
            return fail(r.memory, "avg_lb <= avg_ub_d");
        }
        if r.peak_lb.is_some() && r.peak_ub_d.is_some() && !le(r.peak_lb, r.peak_ub_d) {
            return fail(r.memory, "peak_lb <= peak_ub_d");
        }
    }
    for w in rows.windows(2) {
        let (a, b) = (w[0].values(), w[1].values());
        for col in 1..=6 {
            if !le(b[col], a[col]) {
                let name = CSV_HEADER.split(',').nth(col).unwrap();
                return fail(w[1].memory, &format!("{name} increases with M"));
            }
        }
    }
    Ok(())
}

/// Renders rows as CSV with the fixed header.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r
            .values()
            .iter()
            .map(|v| v.map_or_else(|| "NA".to_string(), format_sig9))
            .collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

/// Sweeps the grid, audits the rows and returns the CSV text.
pub fn run_sweep(spec: &RunSpec) -> Result<String> {
    let rows = sweep_rows(spec)?;
    audit_rows(&rows)?;
    Ok(to_csv(&rows))
}

/// Counts from [`run_verify`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifySummary {
    pub demand_vectors: usize,
    pub t_values: usize,
    pub demand_runs: usize,
    pub packets: usize,
    pub reconstructions: usize,
    pub delivery_failures: usize,
    pub mass_checks: usize,
    pub mass_failures: usize,
    /// One line per failing run.
    pub failures: Vec<String>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.delivery_failures == 0 && self.mass_failures == 0
    }
}

impl std::fmt::Display for VerifySummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{}×{} demand runs, {} failures",
            self.demand_vectors, self.t_values, self.delivery_failures
        )?;
        writeln!(
            f,
            "{} packets generated, {} reconstructions performed",
            self.packets, self.reconstructions
        )?;
        write!(
            f,
            "{} decentralized mass checks, {} failures",
            self.mass_checks, self.mass_failures
        )?;
        for line in &self.failures {
            write!(f, "\n{line}")?;
        }
        Ok(())
    }
}

/// Runs delivery for every demand vector and every integer `t` up to the
/// cap, and the decentralized mass check for every class at every grid point.
pub fn run_verify(spec: &RunSpec) -> Result<VerifySummary> {
    let users = spec.base.users();
    let files = spec.base.files();
    if users > spec.verify_k_cap {
        return Err(Error::LimitExceeded {
            what: "K for verification",
            requested: users,
            limit: spec.verify_k_cap,
        });
    }
    if files > spec.verify_n_cap {
        return Err(Error::LimitExceeded {
            what: "N for verification",
            requested: files,
            limit: spec.verify_n_cap,
        });
    }
    let mut demands = Vec::new();
    DemandVector::for_each(users, files, |d| demands.push(d.clone()));
    let t_max = spec.verify_t_cap.min(users);
    let jobs: Vec<(usize, &DemandVector)> = (0..=t_max)
        .flat_map(|t| demands.iter().map(move |d| (t, d)))
        .collect();
    let outcomes: Vec<(String, Result<_>)> = jobs
        .par_iter()
        .map(|&(t, d)| (format!("t = {t}, d = {d}"), verify_delivery(files, d, t, spec.seed)))
        .collect();

    let mut summary = VerifySummary {
        demand_vectors: demands.len(),
        t_values: t_max + 1,
        demand_runs: jobs.len(),
        ..Default::default()
    };
    for (label, outcome) in outcomes {
        match outcome {
            Ok(report) => {
                summary.packets += report.packets_sent;
                summary.reconstructions += report.reconstructions;
                if !report.passed() {
                    summary.delivery_failures += 1;
                    summary.failures.push(format!("{label}: decode or rate mismatch"));
                }
            }
            Err(e) => {
                summary.delivery_failures += 1;
                summary.failures.push(format!("{label}: {e}"));
            }
        }
    }

    let classes = enumerate_classes(users, files)?;
    for &m in &spec.m_grid {
        let cfg = spec.config_at(m)?;
        for w in &classes {
            summary.mass_checks += 1;
            let report = verify_decentralized_masses(&cfg, &w.class)?;
            if !report.passed() {
                summary.mass_failures += 1;
                summary.failures.push(format!(
                    "M = {m}, class {}: layers {:?} mismatched, coverage {}",
                    w.class, report.mismatched_layers, report.coverage_ok
                ));
            }
        }
    }
    Ok(summary)
}
