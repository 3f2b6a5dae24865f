//! Operand-frequency traces: picking critical minterms and scoring how much
//! of a workload a wrong key corrupts.
//!
//! A trace is a CSV of `minterm_hex,count` rows. The workload error rate of a
//! key is the trace mass that falls on minterms the key corrupts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::locking::{parse_hex, to_hex, Key};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("cannot read trace {path}: {message}")]
    Io { path: String, message: String },
    #[error("trace row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("trace total is zero")]
    ZeroTotal,
    #[error("width mismatch: {0}")]
    Width(String),
    #[error("cannot select {m} minterms: {message}")]
    Selection { m: usize, message: String },
}

type Result<T> = std::result::Result<T, WorkloadError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub source: String,
    /// Hex digits per minterm, uniform across rows.
    pub digits: usize,
    pub entries: BTreeMap<u64, u64>,
    pub total: u64,
}

impl Trace {
    pub fn parse(text: &str, source: &str) -> Result<Trace> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        let mut digits = None;
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let bad = |message: String| WorkloadError::Malformed { row, message };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", rec.len())));
            }
            let hex = rec[0].trim_start_matches("0x");
            match digits {
                None => digits = Some(hex.len()),
                Some(d) if d != hex.len() => return Err(bad(format!("minterm width {} differs from {d}", hex.len()))),
                Some(_) => {}
            }
            let x = parse_hex(hex, 4 * hex.len()).map_err(|e| bad(e.to_string()))?;
            let count: u64 = rec[1].parse().map_err(|_| bad(format!("bad count `{}`", &rec[1])))?;
            *entries.entry(x).or_insert(0) += count;
        }
        let total: u64 = entries.values().sum();
        if total == 0 {
            return Err(WorkloadError::ZeroTotal);
        }
        Ok(Trace { source: source.to_string(), digits: digits.unwrap_or(0), entries, total })
    }

    pub fn count(&self, x: u64) -> u64 {
        self.entries.get(&x).copied().unwrap_or(0)
    }

    /// Checks that every minterm fits in `width` bits written with this
    /// trace's digit count.
    pub fn check_width(&self, width: usize) -> Result<()> {
        if width.div_ceil(4) != self.digits {
            return Err(WorkloadError::Width(format!(
                "trace `{}` has {} hex digits, {width}-bit minterms need {}",
                self.source,
                self.digits,
                width.div_ceil(4)
            )));
        }
        if width < 64 {
            if let Some(&x) = self.entries.keys().find(|&&x| x >> width != 0) {
                return Err(WorkloadError::Width(format!("minterm {x:#x} exceeds {width} bits")));
            }
        }
        Ok(())
    }
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WorkloadError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Trace::parse(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub minterms: Vec<u64>,
    /// Set when the traces share fewer than `m` minterms and the union was
    /// used instead.
    pub fallback_to_union: bool,
}

/// The `m` minterms with the highest aggregate count, drawn from the
/// minterms present in every trace. `weights` multiplies a minterm's
/// aggregate count (missing entries weigh 1). Ties go to the smaller
/// minterm.
pub fn select_critical_minterms(traces: &[Trace], m: usize, weights: Option<&BTreeMap<u64, f64>>) -> Result<Selection> {
    let sel_err = |message: &str| WorkloadError::Selection { m, message: message.to_string() };
    if !m.is_power_of_two() {
        return Err(sel_err("m must be a power of two"));
    }
    if traces.is_empty() {
        return Err(sel_err("no traces"));
    }
    let mut common: BTreeSet<u64> = traces[0].entries.keys().copied().collect();
    for t in &traces[1..] {
        common.retain(|x| t.entries.contains_key(x));
    }
    let fallback_to_union = common.len() < m;
    let pool: BTreeSet<u64> = if fallback_to_union {
        traces.iter().flat_map(|t| t.entries.keys().copied()).collect()
    } else {
        common
    };
    if pool.len() < m {
        return Err(sel_err(&format!("only {} distinct minterms in the traces", pool.len())));
    }
    let mut scored: Vec<(f64, u64)> = pool
        .into_iter()
        .map(|x| {
            let raw: u64 = traces.iter().map(|t| t.count(x)).sum();
            let w = weights.and_then(|w| w.get(&x)).copied().unwrap_or(1.0);
            (raw as f64 * w, x)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(Selection { minterms: scored.into_iter().take(m).map(|(_, x)| x).collect(), fallback_to_union })
}

/// Trace mass on `corrupted` divided by the trace total. `width` is the bit
/// width of the corrupted minterms.
pub fn workload_error_rate(trace: &Trace, corrupted: &[u64], width: usize) -> Result<f64> {
    trace.check_width(width)?;
    let hit: u64 = corrupted.iter().collect::<BTreeSet<_>>().into_iter().map(|&x| trace.count(x)).sum();
    Ok(hit as f64 / trace.total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub minterm: String,
    pub count: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactReport {
    pub key: Key,
    pub corrupted: Vec<String>,
    pub workload_error_rate: f64,
    /// Corrupted minterms that occur in the trace, by descending count.
    pub contributions: Vec<Contribution>,
}

pub fn impact_report(trace: &Trace, key: &Key, corrupted: &[u64], width: usize) -> Result<ImpactReport> {
    let rate = workload_error_rate(trace, corrupted, width)?;
    let mut contributions: Vec<Contribution> = corrupted
        .iter()
        .filter(|&&x| trace.count(x) > 0)
        .map(|&x| Contribution {
            minterm: to_hex(x, width),
            count: trace.count(x),
            share: trace.count(x) as f64 / trace.total as f64,
        })
        .collect();
    contributions.sort_by(|a, b| b.count.cmp(&a.count).then(a.minterm.cmp(&b.minterm)));
    Ok(ImpactReport {
        key: key.clone(),
        corrupted: corrupted.iter().map(|&x| to_hex(x, width)).collect(),
        workload_error_rate: rate,
        contributions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_sums_duplicates() {
        let t = Trace::parse("0003,10\n0005,30", "a").unwrap();
        assert_eq!((t.total, t.digits), (40, 4));
        let t = Trace::parse("0003,1\n0003,2", "b").unwrap();
        assert_eq!(t.count(3), 3);
        assert!(matches!(Trace::parse("", "c"), Err(WorkloadError::ZeroTotal)));
        assert!(matches!(Trace::parse("0003,x", "d"), Err(WorkloadError::Malformed { row: 1, .. })));
        assert!(matches!(Trace::parse("03,1\n0003,1", "e"), Err(WorkloadError::Malformed { row: 2, .. })));
    }

    #[test]
    fn selection_ranks_ties_and_falls_back() {
        let a = Trace::parse("3,5\n5,9\n7,1\n8,100", "a").unwrap();
        let b = Trace::parse("3,4\n5,6\n7,2", "b").unwrap();
        let s = select_critical_minterms(&[a.clone(), b.clone()], 2, None).unwrap();
        assert_eq!(s, Selection { minterms: vec![5, 3], fallback_to_union: false });
        let swapped = select_critical_minterms(&[b.clone(), a.clone()], 2, None).unwrap();
        assert_eq!(swapped, s);
        let w: BTreeMap<u64, f64> = [(5, 0.1), (7, 10.0)].into_iter().collect();
        assert_eq!(select_critical_minterms(&[a.clone(), b.clone()], 2, Some(&w)).unwrap().minterms, vec![7, 3]);
        let s = select_critical_minterms(&[a.clone(), b.clone()], 4, None).unwrap();
        assert!(s.fallback_to_union);
        assert_eq!(s.minterms, vec![8, 5, 3, 7]);
        let tie = Trace::parse("9,1\n2,1", "t").unwrap();
        assert_eq!(select_critical_minterms(&[tie], 1, None).unwrap().minterms, vec![2]);
        assert!(select_critical_minterms(&[a], 3, None).is_err());
    }

    #[test]
    fn error_rate_is_trace_mass() {
        let t = Trace::parse("3,10\n5,30\n9,60", "t").unwrap();
        assert_eq!(workload_error_rate(&t, &[3], 4).unwrap(), 0.1);
        assert_eq!(workload_error_rate(&t, &[1, 2], 4).unwrap(), 0.0);
        assert!(matches!(workload_error_rate(&t, &[3], 8), Err(WorkloadError::Width(_))));
        assert!(matches!(workload_error_rate(&t, &[3], 3), Err(WorkloadError::Width(_))));
        let r = impact_report(&t, &Key::zeros(2), &[9, 3, 4], 4).unwrap();
        assert_eq!(r.contributions.iter().map(|c| c.count).collect::<Vec<_>>(), vec![60, 10]);
        assert!((r.workload_error_rate - 0.7).abs() < 1e-12);
    }
}
