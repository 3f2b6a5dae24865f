//! Error-rate metrics of locked circuits.
//!
//! KER (`e_K`) is the fraction of domain minterms a key corrupts; IER
//! (`γ_X`) is the fraction of wrong keys that corrupt a minterm. A key is
//! wrong when it corrupts at least one domain minterm. Exhaustive results
//! are exact rationals; sampled ones carry a 95% Wilson interval.

mod sweep;

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::attacks::{wilson_interval, ExplicitFamilies};
use crate::locking::{bind_key, rng_for, Key, LockError, SasSpec};
use crate::netlist::{check_equivalence, Circuit, EquivMode, NetlistError};

pub use sweep::{Domain, KeySpace, SweepCounts, MAX_DOMAIN_BITS, MAX_KEY_BITS};
use sweep::Harness;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("interface mismatch: {0}")]
    Interface(String),
    #[error("too large for exhaustive evaluation: {0}")]
    TooLarge(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

type Result<T> = std::result::Result<T, MetricsError>;

/// Exact rational, serialized as `{"num": .., "den": ..}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exact(pub BigRational);

impl Exact {
    pub fn new(num: u64, den: u64) -> Exact {
        Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl std::fmt::Display for Exact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Exact", 2)?;
        match (self.0.numer().to_i64(), self.0.denom().to_i64()) {
            (Some(n), Some(d)) => {
                st.serialize_field("num", &n)?;
                st.serialize_field("den", &d)?;
            }
            _ => {
                st.serialize_field("num", &self.0.numer().to_string())?;
                st.serialize_field("den", &self.0.denom().to_string())?;
            }
        }
        st.end()
    }
}

/// A sampled proportion with its 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub hits: u64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_hits(hits: u64, samples: u64) -> Estimate {
        let (low, high) = wilson_interval(hits, samples);
        let estimate = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        Estimate { estimate, low, high, hits, samples }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.low <= value && value <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Method {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Exact(Exact),
    Estimate(Estimate),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    /// Key (KER table) or minterm (IER table) in hex.
    pub at: String,
    pub value: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Ker,
    Ier,
}

/// A KER or IER table with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorProfile {
    pub table: Table,
    pub method: Method,
    pub domain: Vec<String>,
    pub free_key_bits: usize,
    /// Size of the wrong-key universe; known only for exhaustive sweeps.
    pub wrong_keys: Option<u64>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorProfile {
    /// CSV with columns `minterm,num,den,value` (or `key,...` for KER).
    pub fn to_csv(&self) -> String {
        let head = match self.table {
            Table::Ker => "key",
            Table::Ier => "minterm",
        };
        let mut s = String::new();
        match self.method {
            Method::Exhaustive => {
                let _ = writeln!(s, "{head},num,den,value");
            }
            Method::Sampled { .. } => {
                let _ = writeln!(s, "{head},hits,samples,estimate,low,high");
            }
        }
        for r in &self.rows {
            let _ = match &r.value {
                Value::Exact(e) => writeln!(s, "{},{},{},{}", r.at, e.0.numer(), e.0.denom(), e.to_f64()),
                Value::Estimate(e) => {
                    writeln!(s, "{},{},{},{},{},{}", r.at, e.hits, e.samples, e.estimate, e.low, e.high)
                }
            };
        }
        s
    }
}

fn hex(value: u64, bits: usize) -> String {
    crate::locking::to_hex(value, bits)
}

impl SweepCounts {
    pub fn num_keys(&self) -> u64 {
        self.ker_counts.len() as u64
    }

    pub fn num_minterms(&self) -> u64 {
        self.ier_counts.len() as u64
    }

    /// Keys (enumeration indices) that corrupt at least one minterm.
    pub fn wrong_keys(&self) -> u64 {
        self.ker_counts.iter().filter(|&&c| c > 0).count() as u64
    }

    pub fn ker(&self, key_index: u64) -> Exact {
        Exact::new(self.ker_counts[key_index as usize] as u64, self.num_minterms())
    }

    /// `None` when no key is wrong.
    pub fn ier(&self, minterm: u64) -> Option<Exact> {
        let w = self.wrong_keys();
        (w > 0).then(|| Exact::new(self.ier_counts[minterm as usize], w))
    }

    /// Mean KER over wrong keys, summed key by key.
    pub fn average_ker(&self) -> Option<Exact> {
        let w = self.wrong_keys();
        if w == 0 {
            return None;
        }
        let den = BigInt::from(self.num_minterms());
        let mut sum = BigRational::zero();
        for &c in self.ker_counts.iter().filter(|&&c| c > 0) {
            sum += BigRational::new(BigInt::from(c), den.clone());
        }
        Some(Exact(sum / BigInt::from(w)))
    }

    /// Mean IER over all minterms, summed minterm by minterm.
    pub fn average_ier(&self) -> Option<Exact> {
        let w = self.wrong_keys();
        if w == 0 {
            return None;
        }
        let den = BigInt::from(w);
        let mut sum = BigRational::zero();
        for &c in &self.ier_counts {
            sum += BigRational::new(BigInt::from(c), den.clone());
        }
        Some(Exact(sum / BigInt::from(self.num_minterms())))
    }

    pub fn ier_profile(&self, domain: &Domain) -> ErrorProfile {
        let w = self.wrong_keys();
        let rows = (0..self.num_minterms())
            .map(|x| ErrorRow {
                at: hex(x, self.width),
                value: Value::Exact(self.ier(x).unwrap_or_else(|| Exact::new(0, 1))),
            })
            .collect();
        ErrorProfile {
            table: Table::Ier,
            method: Method::Exhaustive,
            domain: domain.inputs.clone(),
            free_key_bits: self.key_bits,
            wrong_keys: Some(w),
            rows,
        }
    }

    pub fn ker_profile(&self, domain: &Domain, keys: &KeySpace) -> ErrorProfile {
        let rows = (0..self.num_keys())
            .map(|k| ErrorRow { at: keys.key(k).to_hex(), value: Value::Exact(self.ker(k)) })
            .collect();
        ErrorProfile {
            table: Table::Ker,
            method: Method::Exhaustive,
            domain: domain.inputs.clone(),
            free_key_bits: self.key_bits,
            wrong_keys: Some(self.wrong_keys()),
            rows,
        }
    }
}

/// Word `i` carries bit `width-1-i` of each lane's minterm.
fn pack_minterms(minterms: &[u64], width: usize) -> Vec<u64> {
    (0..width)
        .map(|i| {
            let bit = width - 1 - i;
            minterms.iter().enumerate().fold(0u64, |acc, (lane, &x)| acc | ((x >> bit) & 1) << lane)
        })
        .collect()
}

fn single_key_space(key: &Key) -> KeySpace {
    KeySpace { base: key.clone(), free: Vec::new() }
}

/// Minterms of `domain` that `key` corrupts, ascending.
pub fn corrupted_set(locked: &Circuit, original: &Circuit, key: &Key, domain: &Domain) -> Result<Vec<u64>> {
    let h = Harness::new(locked, original, domain, &single_key_space(key))?;
    if h.width > MAX_DOMAIN_BITS {
        return Err(MetricsError::TooLarge(format!("{} input bits exceed {MAX_DOMAIN_BITS}", h.width)));
    }
    let total = 1u64 << h.width;
    let valid = crate::netlist::valid_lanes(h.width);
    let mut out = Vec::new();
    let mut base = 0;
    while base < total {
        let mut c = h.corrupt_word_for_key(0, &crate::netlist::counting_words(h.width, base)) & valid;
        while c != 0 {
            out.push(base + c.trailing_zeros() as u64);
            c &= c - 1;
        }
        base += 64;
    }
    Ok(out)
}

pub fn ker(locked: &Circuit, original: &Circuit, key: &Key, domain: &Domain) -> Result<Exact> {
    let set = corrupted_set(locked, original, key, domain)?;
    Ok(Exact::new(set.len() as u64, 1 << domain.width()))
}

/// KER estimate from `samples` uniform domain minterms (with replacement).
pub fn ker_sampled(
    locked: &Circuit,
    original: &Circuit,
    key: &Key,
    domain: &Domain,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let h = Harness::new(locked, original, domain, &single_key_space(key))?;
    let mut rng = rng_for(seed, 0x6b6572);
    let mask = if h.width >= 64 { !0 } else { (1u64 << h.width) - 1 };
    let mut hits = 0;
    let mut done = 0;
    while done < samples {
        let lanes = (samples - done).min(64);
        let xs: Vec<u64> = (0..lanes).map(|_| rng.gen::<u64>() & mask).collect();
        let c = h.corrupt_word_for_key(0, &pack_minterms(&xs, h.width));
        let live = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        hits += (c & live).count_ones() as u64;
        done += lanes;
    }
    Ok(Estimate::from_hits(hits, samples))
}

/// Exhaustive KER/IER counts over `domain` × `keys`.
pub fn error_sweep(locked: &Circuit, original: &Circuit, domain: &Domain, keys: &KeySpace) -> Result<SweepCounts> {
    let h = Harness::new(locked, original, domain, keys)?;
    sweep::sweep(&h)
}

pub fn ier(locked: &Circuit, original: &Circuit, minterm: u64, domain: &Domain, keys: &KeySpace) -> Result<Exact> {
    if domain.width() < 64 && minterm >> domain.width() != 0 {
        return Err(MetricsError::Interface(format!("minterm {minterm:#x} wider than the domain")));
    }
    let counts = error_sweep(locked, original, domain, keys)?;
    counts.ier(minterm).ok_or_else(|| MetricsError::Degenerate("no wrong keys".into()))
}

/// IER estimate: keys are drawn uniformly from `keys`; those that corrupt
/// nothing in the domain are discarded, and the estimate is the fraction of
/// the remaining (wrong) keys that corrupt `minterm`. Wrongness is decided
/// by exhaustive simulation for narrow domains and by SAT otherwise.
pub fn ier_sampled(
    locked: &Circuit,
    original: &Circuit,
    minterm: u64,
    domain: &Domain,
    keys: &KeySpace,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if domain.width() < 64 && minterm >> domain.width() != 0 {
        return Err(MetricsError::Interface(format!("minterm {minterm:#x} wider than the domain")));
    }
    let h = Harness::new(locked, original, domain, keys)?;
    let mut rng = rng_for(seed, 0x696572);
    let xw = pack_minterms(&[minterm], h.width);
    let (mut hits, mut wrong) = (0, 0);
    for _ in 0..samples {
        let mut key = keys.base.clone();
        for &b in &keys.free {
            key.bits[b] = rng.gen();
        }
        let idx = keys.index_of(&key).expect("sampled key lies in its space");
        if h.corrupt_word_for_key(idx, &xw) & 1 == 1 {
            hits += 1;
            wrong += 1;
        } else if is_wrong(&h, locked, original, domain, &key, idx)? {
            wrong += 1;
        }
    }
    Ok(Estimate::from_hits(hits, wrong))
}

fn is_wrong(h: &Harness<'_>, locked: &Circuit, original: &Circuit, domain: &Domain, key: &Key, idx: u64) -> Result<bool> {
    if h.width <= MAX_DOMAIN_BITS {
        let total = 1u64 << h.width;
        let valid = crate::netlist::valid_lanes(h.width);
        let mut base = 0;
        while base < total {
            if h.corrupt_word_for_key(idx, &crate::netlist::counting_words(h.width, base)) & valid != 0 {
                return Ok(true);
            }
            base += 64;
        }
        return Ok(false);
    }
    let fixed: Vec<(String, bool)> = original
        .input_names()
        .into_iter()
        .filter(|n| !domain.inputs.iter().any(|d| d == n))
        .map(|n| (n.to_string(), false))
        .collect();
    let l = bind_key(locked, key)?.bind_inputs(&fixed)?;
    let o = original.bind_inputs(&fixed)?;
    Ok(!check_equivalence(&l, &o, EquivMode::Sat)?.is_equal())
}

/// Average KER over wrong keys and average IER over minterms, computed as
/// separate exact sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Averages {
    pub e_w: Exact,
    pub gamma: Exact,
    pub equal: bool,
    pub wrong_keys: u64,
    pub minterms: u64,
}

pub fn average_error_rates(locked: &Circuit, original: &Circuit, domain: &Domain, keys: &KeySpace) -> Result<Averages> {
    let counts = error_sweep(locked, original, domain, keys)?;
    averages_from_counts(&counts)
}

pub fn averages_from_counts(counts: &SweepCounts) -> Result<Averages> {
    let no_wrong = || MetricsError::Degenerate("no wrong keys".into());
    let e_w = counts.average_ker().ok_or_else(no_wrong)?;
    let gamma = counts.average_ier().ok_or_else(no_wrong)?;
    let equal = e_w == gamma;
    assert!(equal, "average KER {e_w} differs from average IER {gamma}");
    Ok(Averages { e_w, gamma, equal, wrong_keys: counts.wrong_keys(), minterms: counts.num_minterms() })
}

/// Wrong-key corruption families for the model attack.
pub fn wrong_key_families(locked: &Circuit, original: &Circuit, domain: &Domain, keys: &KeySpace) -> Result<ExplicitFamilies> {
    let h = Harness::new(locked, original, domain, keys)?;
    let counts = sweep::sweep(&h)?;
    let families = sweep::families(&h, &counts);
    Ok(ExplicitFamilies { num_keys: counts.wrong_keys() as usize, families })
}

/// `(l·2^n + m) / (l + 1)`, the expected SAT-attack iteration count of a
/// SAS or RSAS configuration under uniform DI choice.
pub fn expected_iterations(spec: &SasSpec) -> Result<Exact> {
    if spec.m == 0 {
        return Err(MetricsError::Degenerate("no critical minterms".into()));
    }
    Ok(expected_iterations_for(spec.n, spec.m, spec.l))
}

pub fn expected_iterations_for(n: usize, m: usize, l: usize) -> Exact {
    let num = BigInt::from(l) * (BigInt::from(1) << n) + BigInt::from(m);
    Exact(BigRational::new(num, BigInt::from(l + 1)))
}

/// Average IER of a SAS configuration from its IER law:
/// `(m·(l/m) + (2^n − m)·2^−n) / 2^n`.
pub fn sas_average_ier(n: usize, m: usize, l: usize) -> Exact {
    let two_n = BigInt::from(1) << n;
    let critical = BigRational::from_integer(BigInt::from(l));
    let rest = BigRational::new(two_n.clone() - BigInt::from(m), two_n.clone());
    Exact((critical + rest) / two_n)
}

/// Chance that the SAT attack on SFLL-flex hits the correct key within `q`
/// iterations: `min(1, q·2^(⌈log2 c⌉ − k))`.
pub fn sfll_sat_success_prob(q: u64, c: u64, k: u32) -> f64 {
    let log_c = if c <= 1 { 0 } else { 64 - (c - 1).leading_zeros() } as i32;
    (q as f64 * 2f64.powi(log_c - k as i32)).min(1.0)
}

/// Whether an observed mean iteration count meets the `1/γ` lower bound.
pub fn tradeoff_check(gamma: &Exact, observed_mean: f64) -> Result<bool> {
    if gamma.0.is_zero() {
        return Err(MetricsError::Degenerate("γ = 0".into()));
    }
    let bound = (BigRational::from_integer(1.into()) / &gamma.0).to_f64().unwrap_or(f64::INFINITY);
    Ok(observed_mean >= bound)
}
