//! Exhaustive corruption sweeps over (key, minterm) pairs.
//!
//! The enumeration index `t = key · 2^w + x` is packed 64 per word, so one
//! bit-parallel evaluation covers 64 pairs whatever the split between key
//! and input bits.

use rayon::prelude::*;

use super::MetricsError;
use crate::locking::{key_inputs, Key};
use crate::netlist::Circuit;

/// Most key bits an exhaustive sweep will enumerate.
pub const MAX_KEY_BITS: usize = 24;
/// Most input bits an exhaustive sweep will enumerate.
pub const MAX_DOMAIN_BITS: usize = 20;

/// The minterm domain: the named data inputs vary (first name = MSB),
/// every other data input is held at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub inputs: Vec<String>,
}

impl Domain {
    pub fn new(inputs: Vec<String>) -> Domain {
        Domain { inputs }
    }

    /// All primary inputs of `original`.
    pub fn full(original: &Circuit) -> Domain {
        Domain { inputs: original.input_names().iter().map(|s| s.to_string()).collect() }
    }

    pub fn width(&self) -> usize {
        self.inputs.len()
    }
}

/// Which keys a sweep enumerates: the bits listed in `free` (first = MSB of
/// the enumeration index) vary; the others keep their value in `base`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySpace {
    pub base: Key,
    pub free: Vec<usize>,
}

impl KeySpace {
    pub fn full(key_len: usize) -> KeySpace {
        KeySpace { base: Key::zeros(key_len), free: (0..key_len).collect() }
    }

    /// Only the bits `[offset, offset + width)` vary; the rest follow `base`.
    pub fn restricted(base: Key, offset: usize, width: usize) -> KeySpace {
        KeySpace { base, free: (offset..offset + width).collect() }
    }

    pub fn size(&self) -> u64 {
        1u64 << self.free.len()
    }

    pub fn key(&self, index: u64) -> Key {
        let mut k = self.base.clone();
        let f = self.free.len();
        for (i, &bit) in self.free.iter().enumerate() {
            k.bits[bit] = (index >> (f - 1 - i)) & 1 == 1;
        }
        k
    }

    /// Enumeration index of `key`, if it lies in this space.
    pub fn index_of(&self, key: &Key) -> Option<u64> {
        let fixed_ok = (0..key.len()).filter(|b| !self.free.contains(b)).all(|b| key.bits[b] == self.base.bits[b]);
        fixed_ok.then(|| self.free.iter().fold(0, |acc, &b| acc << 1 | key.bits[b] as u64))
    }
}

/// How each locked-circuit input is driven during a sweep.
#[derive(Debug, Clone, Copy)]
enum Feed {
    Domain(usize),
    FreeKey(usize),
    Const(bool),
}

/// Wiring shared by all sweeps over one (locked, original, domain, keys) setup.
pub(crate) struct Harness<'a> {
    locked: &'a Circuit,
    original: &'a Circuit,
    locked_feed: Vec<Feed>,
    original_feed: Vec<Feed>,
    pub width: usize,
    pub key_bits: usize,
}

impl<'a> Harness<'a> {
    pub fn new(locked: &'a Circuit, original: &'a Circuit, domain: &Domain, keys: &KeySpace) -> Result<Self, MetricsError> {
        let key_names = key_inputs(locked);
        if key_names.len() != keys.base.len() {
            return Err(MetricsError::Interface(format!(
                "locked circuit has {} key inputs, key space has {} bits",
                key_names.len(),
                keys.base.len()
            )));
        }
        if locked.num_outputs() != original.num_outputs() {
            return Err(MetricsError::Interface("output counts differ".into()));
        }
        for d in &domain.inputs {
            if original.input_position(d).is_none() || locked.input_position(d).is_none() {
                return Err(MetricsError::Interface(format!("domain input `{d}` missing")));
            }
        }
        let data_feed = |name: &str| match domain.inputs.iter().position(|d| d == name) {
            Some(p) => Feed::Domain(p),
            None => Feed::Const(false),
        };
        let mut locked_feed = Vec::with_capacity(locked.num_inputs());
        for name in locked.input_names() {
            let feed = match key_names.iter().position(|k| k == name) {
                Some(k) => match keys.free.iter().position(|&f| f == k) {
                    Some(p) => Feed::FreeKey(p),
                    None => Feed::Const(keys.base.bits[k]),
                },
                None => {
                    if original.input_position(name).is_none() {
                        return Err(MetricsError::Interface(format!("locked input `{name}` not in original")));
                    }
                    data_feed(name)
                }
            };
            locked_feed.push(feed);
        }
        let original_feed = original.input_names().into_iter().map(data_feed).collect();
        Ok(Harness { locked, original, locked_feed, original_feed, width: domain.width(), key_bits: keys.free.len() })
    }

    fn words(feed: &[Feed], key_words: &[u64], x_words: &[u64]) -> Vec<u64> {
        feed.iter()
            .map(|f| match *f {
                Feed::Domain(p) => x_words[p],
                Feed::FreeKey(p) => key_words[p],
                Feed::Const(b) => {
                    if b {
                        !0
                    } else {
                        0
                    }
                }
            })
            .collect()
    }

    /// Corruption word for 64 (key, minterm) pairs given packed index bits
    /// (`idx[..key_bits]` key, rest minterm).
    pub fn corrupt_word(&self, idx: &[u64]) -> u64 {
        let (kw, xw) = idx.split_at(self.key_bits);
        let got = self.locked.eval_words(&Self::words(&self.locked_feed, kw, xw));
        let want = self.original.eval_words(&Self::words(&self.original_feed, kw, xw));
        got.iter().zip(&want).fold(0, |acc, (g, w)| acc | (g ^ w))
    }

    /// Corruption word for one fixed key over 64 packed minterms.
    pub fn corrupt_word_for_key(&self, key_index: u64, x_words: &[u64]) -> u64 {
        let kw: Vec<u64> =
            (0..self.key_bits).map(|i| if (key_index >> (self.key_bits - 1 - i)) & 1 == 1 { !0 } else { 0 }).collect();
        let got = self.locked.eval_words(&Self::words(&self.locked_feed, &kw, x_words));
        let want = self.original.eval_words(&Self::words(&self.original_feed, &kw, x_words));
        got.iter().zip(&want).fold(0, |acc, (g, w)| acc | (g ^ w))
    }
}

/// Corruption counts of a complete sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepCounts {
    pub width: usize,
    pub key_bits: usize,
    /// Corrupted minterms per enumerated key.
    pub ker_counts: Vec<u32>,
    /// Corrupting keys per minterm.
    pub ier_counts: Vec<u64>,
}

pub(crate) fn sweep(h: &Harness<'_>) -> Result<SweepCounts, MetricsError> {
    if h.key_bits > MAX_KEY_BITS {
        return Err(MetricsError::TooLarge(format!("{} key bits exceed {MAX_KEY_BITS}", h.key_bits)));
    }
    if h.width > MAX_DOMAIN_BITS {
        return Err(MetricsError::TooLarge(format!("{} input bits exceed {MAX_DOMAIN_BITS}", h.width)));
    }
    let (w, q) = (h.width, h.key_bits);
    let total_bits = w + q;
    let num_keys = 1usize << q;
    let num_x = 1usize << w;
    // Keys per parallel chunk: whole words on both sides.
    let keys_per_chunk = if w >= 6 { 1 } else { (64 >> w).max(1) }.max(num_keys.min(4096) / 64).min(num_keys);
    let keys_per_chunk = keys_per_chunk.next_power_of_two().min(num_keys);
    let lanes_valid = crate::netlist::valid_lanes(total_bits);
    let mut ker_counts = vec![0u32; num_keys];
    let ier_counts = ker_counts
        .par_chunks_mut(keys_per_chunk)
        .enumerate()
        .fold(
            || vec![0u64; num_x],
            |mut ier, (ci, ker)| {
                let first = (ci * keys_per_chunk) as u64;
                let start = first << w;
                let end = (first + ker.len() as u64) << w;
                let mut base = start;
                while base < end {
                    let idx = crate::netlist::counting_words(total_bits, base);
                    let mut c = h.corrupt_word(&idx) & lanes_valid;
                    while c != 0 {
                        let lane = c.trailing_zeros() as u64;
                        c &= c - 1;
                        let t = base + lane;
                        ker[((t >> w) - first) as usize] += 1;
                        ier[(t as usize) & (num_x - 1)] += 1;
                    }
                    base += 64;
                }
                ier
            },
        )
        .reduce(
            || vec![0u64; num_x],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(SweepCounts { width: w, key_bits: q, ker_counts, ier_counts })
}

/// Per-minterm bitsets over the enumerated keys (bit `k` set when key `k`
/// corrupts the minterm). Keys that corrupt nothing are dropped from the
/// numbering so the bitsets index wrong keys only.
pub(crate) fn families(h: &Harness<'_>, counts: &SweepCounts) -> Vec<Vec<u64>> {
    let w = h.width;
    let wrong: Vec<u64> = (0..counts.ker_counts.len() as u64).filter(|&k| counts.ker_counts[k as usize] > 0).collect();
    let words = wrong.len().div_ceil(64);
    let num_x = 1usize << w;
    let mut fam = vec![vec![0u64; words]; num_x];
    let valid = crate::netlist::valid_lanes(w);
    for (wi, &k) in wrong.iter().enumerate() {
        let mut base = 0u64;
        while base < num_x as u64 {
            let xw = crate::netlist::counting_words(w, base);
            let mut c = h.corrupt_word_for_key(k, &xw) & valid;
            while c != 0 {
                let x = base as usize + c.trailing_zeros() as usize;
                c &= c - 1;
                fam[x][wi / 64] |= 1 << (wi % 64);
            }
            base += 64;
        }
    }
    fam
}
