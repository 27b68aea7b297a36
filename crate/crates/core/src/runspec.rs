//! Plain-text run specification.
//!
//! One `key=value` per line, `#` starts a comment, lists are comma
//! separated. Recognised keys:
//!
//! | key | value | default |
//! |-----|-------|---------|
//! | `format` | `1` | `1` |
//! | `K`, `N` | positive integers | required |
//! | `R` | positive real | `1` |
//! | `gains` / `gains_inv` | `K` values of `h_k^2` or of `1/h_k^2` | one required |
//! | `m_grid` | `m1,m2,...` or `start:step:end` | required |
//! | `schemes` | `centralized`, `decentralized` | both |
//! | `compute_lb` | `true` / `false` | `true` |
//! | `verify` | `true` / `false` | `false` |
//! | `verify_k_cap`, `verify_n_cap` | at most 6 | 6 |
//! | `verify_t_cap` | max integer `t` simulated | `K` |
//! | `output` | CSV path | stdout |
//! | `seed` | unsigned integer | `42` |

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::delivery::{MAX_SIM_FILES, MAX_SIM_USERS};
use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::schemes::Scheme;

pub const FORMAT_VERSION: u32 = 1;

const KEYS: &[&str] = &[
    "format",
    "K",
    "N",
    "R",
    "gains",
    "gains_inv",
    "m_grid",
    "schemes",
    "compute_lb",
    "verify",
    "verify_k_cap",
    "verify_n_cap",
    "verify_t_cap",
    "output",
    "seed",
];

/// Fully validated run specification.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// System parameters at `M = 0`.
    pub base: SystemConfig,
    /// Strictly increasing cache sizes in `[0, N]`.
    pub m_grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub compute_lb: bool,
    pub verify: bool,
    pub verify_k_cap: usize,
    pub verify_n_cap: usize,
    pub verify_t_cap: usize,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl RunSpec {
    pub fn config_at(&self, memory: f64) -> Result<SystemConfig> {
        self.base.with_memory(memory)
    }

    pub fn has_scheme(&self, scheme: Scheme) -> bool {
        self.schemes.contains(&scheme)
    }
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number<T: FromStr>(e: &Entry, key: &str) -> Result<T> {
    e.value
        .trim()
        .parse()
        .map_err(|_| parse_err(e.line, format!("malformed number '{}' for {key}", e.value.trim())))
}

fn list(e: &Entry, key: &str) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| parse_err(e.line, format!("malformed number '{}' in {key}", v.trim())))
        })
        .collect()
}

fn flag(e: &Entry, key: &str) -> Result<bool> {
    match e.value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(parse_err(e.line, format!("expected true or false for {key}, got '{other}'"))),
    }
}

fn grid(e: &Entry, files: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = e.value.split(':').collect();
    let values = match parts.as_slice() {
        [_] => list(e, "m_grid")?,
        [start, step, end] => {
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(e.line, format!("malformed number '{}' in m_grid", s.trim())))
            };
            let (start, step, end) = (parse(start)?, parse(step)?, parse(end)?);
            if !(step > 0.0 && step.is_finite()) {
                return Err(parse_err(e.line, "m_grid step must be positive"));
            }
            if !(start.is_finite() && end.is_finite()) || end < start {
                return Err(parse_err(e.line, "m_grid range must satisfy start <= end"));
            }
            let slack = 1e-9 * end.abs().max(1.0);
            let count = ((end - start + slack) / step).floor() as usize + 1;
            let mut v: Vec<f64> = (0..count).map(|i| start + i as f64 * step).collect();
            // land exactly on `end` when the last step reaches it up to rounding
            if let Some(last) = v.last_mut() {
                if (*last - end).abs() <= slack {
                    *last = end;
                }
            }
            v
        }
        _ => return Err(parse_err(e.line, "m_grid must be a list or start:step:end")),
    };
    if values.is_empty() {
        return Err(parse_err(e.line, "m_grid is empty"));
    }
    for &m in &values {
        if !m.is_finite() || m < 0.0 {
            return Err(parse_err(e.line, format!("M = {m} is negative")));
        }
        if m > files as f64 {
            return Err(parse_err(e.line, format!("M exceeds N ({m} > {files})")));
        }
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(parse_err(e.line, "m_grid must be strictly increasing"));
    }
    Ok(values)
}

fn cap(entries: &HashMap<&str, Entry>, key: &str, limit: usize) -> Result<usize> {
    match entries.get(key) {
        None => Ok(limit),
        Some(e) => {
            let v: usize = number(e, key)?;
            if v > limit {
                return Err(parse_err(e.line, format!("{key} = {v} exceeds the hard limit of {limit}")));
            }
            Ok(v)
        }
    }
}

/// Parses and validates a run specification.
pub fn parse_spec(text: &str) -> Result<RunSpec> {
    let mut entries: HashMap<&str, Entry> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected key=value, got '{content}'")))?;
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(parse_err(line, format!("unknown key {key}")));
        };
        if let Some(prev) = entries.insert(known, Entry { line, value: value.trim() }) {
            return Err(parse_err(line, format!("duplicate key {key} (first on line {})", prev.line)));
        }
    }
    let required = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| Error::Spec(format!("missing required key {key}")))
    };

    if let Some(e) = entries.get("format") {
        let v: u32 = number(e, "format")?;
        if v != FORMAT_VERSION {
            return Err(parse_err(e.line, format!("unsupported format {v}, expected {FORMAT_VERSION}")));
        }
    }
    let users: usize = number(required("K")?, "K")?;
    let files: usize = number(required("N")?, "N")?;
    let rate: f64 = match entries.get("R") {
        Some(e) => number(e, "R")?,
        None => 1.0,
    };
    let gains = match (entries.get("gains"), entries.get("gains_inv")) {
        (Some(_), Some(e)) => return Err(parse_err(e.line, "give only one of gains and gains_inv")),
        (Some(e), None) => list(e, "gains")?,
        (None, Some(e)) => list(e, "gains_inv")?.into_iter().map(|x| 1.0 / x).collect(),
        (None, None) => return Err(Error::Spec("missing required key gains or gains_inv".into())),
    };
    let base = SystemConfig::new(users, files, rate, 0.0, gains)?;
    let m_grid = grid(required("m_grid")?, files)?;

    let schemes = match entries.get("schemes") {
        None => Scheme::ALL.to_vec(),
        Some(e) => {
            let mut v = Vec::new();
            for name in e.value.split(',').map(str::trim) {
                let s = Scheme::ALL
                    .into_iter()
                    .find(|s| s.name() == name)
                    .ok_or_else(|| parse_err(e.line, format!("unknown scheme '{name}'")))?;
                if !v.contains(&s) {
                    v.push(s);
                }
            }
            v
        }
    };
    let compute_lb = entries.get("compute_lb").map_or(Ok(true), |e| flag(e, "compute_lb"))?;
    let verify = entries.get("verify").map_or(Ok(false), |e| flag(e, "verify"))?;
    let verify_k_cap = cap(&entries, "verify_k_cap", MAX_SIM_USERS)?;
    let verify_n_cap = cap(&entries, "verify_n_cap", MAX_SIM_FILES)?;
    let verify_t_cap = match entries.get("verify_t_cap") {
        Some(e) => number(e, "verify_t_cap")?,
        None => users,
    };
    let output = entries.get("output").map(|e| PathBuf::from(e.value));
    let seed = match entries.get("seed") {
        Some(e) => number(e, "seed")?,
        None => 42,
    };
    Ok(RunSpec {
        base,
        m_grid,
        schemes,
        compute_lb,
        verify,
        verify_k_cap,
        verify_n_cap,
        verify_t_cap,
        output,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG: &str = "K=5\nN=8\ngains_inv=2,1.8,1.6,1.4,1.2\nm_grid=0:0.5:8\n";

    #[test]
    fn reference_setup() {
        let s = parse_spec(FIG).unwrap();
        assert_eq!(s.base.users(), 5);
        assert_eq!(s.base.files(), 8);
        assert_eq!(s.base.rate(), 1.0);
        assert!((s.base.gain(1) - 0.5).abs() < 1e-15);
        assert_eq!(s.m_grid.len(), 17);
        assert_eq!(s.m_grid[16], 8.0);
        assert_eq!(s.schemes, Scheme::ALL.to_vec());
        assert!(s.compute_lb && !s.verify);
        assert_eq!(s.seed, 42);
        assert_eq!(s.output, None);
    }

    #[test]
    fn comments_and_lists() {
        let s = parse_spec(
            "# setup\nformat=1\nK=2 # users\nN=2\nR=0.5\ngains=1,2\nm_grid=0, 0.5,2\nschemes=decentralized\ncompute_lb=false\nseed=7\noutput=out.csv\n",
        )
        .unwrap();
        assert_eq!(s.m_grid, vec![0.0, 0.5, 2.0]);
        assert_eq!(s.schemes, vec![Scheme::Decentralized]);
        assert!(!s.compute_lb);
        assert_eq!(s.seed, 7);
        assert_eq!(s.output, Some(PathBuf::from("out.csv")));
    }

    #[test]
    fn range_rounding() {
        let s = parse_spec("K=1\nN=1\ngains=1\nm_grid=0:0.1:1\n").unwrap();
        assert_eq!(s.m_grid.len(), 11);
        assert_eq!(*s.m_grid.last().unwrap(), 1.0);
    }

    #[test]
    fn missing_k() {
        let e = parse_spec("N=8\ngains=1\nm_grid=0\n").unwrap_err();
        assert_eq!(e.to_string(), "missing required key K");
    }

    #[test]
    fn m_exceeds_n() {
        let e = parse_spec("K=5\nN=8\ngains_inv=2,1.8,1.6,1.4,1.2\nm_grid=9\n").unwrap_err();
        assert!(e.to_string().contains("M exceeds N"), "{e}");
        assert!(matches!(e, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn line_numbered_errors() {
        assert!(matches!(
            parse_spec("K=2\nfoo=1\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        let e = parse_spec("K=2\nN=x\n").unwrap_err();
        assert_eq!(e.to_string(), "line 2: malformed number 'x' for N");
        assert!(matches!(
            parse_spec("K=1\nK=2\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            parse_spec("K=1\nN=1\ngains=1\nm_grid=0.5,0.2\n").unwrap_err(),
            Error::Parse { line: 4, .. }
        ));
        assert!(matches!(
            parse_spec("format=2\n").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn cap_over_limit() {
        let e = parse_spec(&format!("{FIG}verify_k_cap=10\n")).unwrap_err();
        assert!(e.to_string().contains("hard limit of 6"), "{e}");
    }

    #[test]
    fn config_errors_propagate() {
        let e = parse_spec("K=2\nN=2\ngains=2,1\nm_grid=0\n").unwrap_err();
        assert!(matches!(e, Error::InvalidConfig { field: "gains", .. }));
        let e = parse_spec("K=2\nN=2\ngains=1,2,3\nm_grid=0\n").unwrap_err();
        assert!(matches!(e, Error::InvalidConfig { .. }));
    }
}
