//! Locking schemes: SAS (one or several blocks), RSAS, Anti-SAT, and SFLL-flex.
//!
//! Key inputs are named `keyinput<i>` and appended after the original
//! primary inputs. An `n`-bit slice value is read most significant bit
//! first: slice position 0 (and the lowest-numbered key bit of a field) is
//! the MSB.

mod partition;
mod sas;
mod sfll;
mod spec_file;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{Circuit, NetlistError};

pub use partition::{make_partition, Partition};
pub use sas::{build_sas_block, lock_antisat, lock_rsas, lock_sas, sas_block_output, SasSpec};
pub use sfll::{cube_matches, lock_sfll_flex, Cube, SfllSpec};
pub use partition::{assign_blocks, EXPLICIT_LIMIT};
pub use spec_file::{parse_hex, to_hex, CubeFile, PartitionFile, SasSpecFile, SfllSpecFile, SpecFile};

pub const KEY_PREFIX: &str = "keyinput";

pub fn key_input_name(i: usize) -> String {
    format!("{KEY_PREFIX}{i}")
}

pub fn is_key_input(name: &str) -> bool {
    name.strip_prefix(KEY_PREFIX).is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LockError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("wire `{0}` not found in target circuit")]
    MissingWire(String),
    #[error("malformed key: {0}")]
    BadKey(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

fn invalid(msg: impl Into<String>) -> LockError {
    LockError::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    Sas,
    Rsas,
    Antisat,
    SfllFlex,
}

impl Scheme {
    pub fn from_cli(s: &str) -> Option<Scheme> {
        match s.to_ascii_lowercase().as_str() {
            "sas" => Some(Scheme::Sas),
            "rsas" => Some(Scheme::Rsas),
            "antisat" | "anti-sat" => Some(Scheme::Antisat),
            "sfll-flex" | "sfll_flex" | "sfll" => Some(Scheme::SfllFlex),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sas => "SAS",
            Scheme::Rsas => "RSAS",
            Scheme::Antisat => "ANTISAT",
            Scheme::SfllFlex => "SFLL_FLEX",
        })
    }
}

/// Key bits in key-input order (`bits[i]` drives `keyinput<i>`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key {
    pub bits: Vec<bool>,
}

impl Key {
    pub fn zeros(len: usize) -> Key {
        Key { bits: vec![false; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn random(rng: &mut impl Rng, len: usize) -> Key {
        Key { bits: (0..len).map(|_| rng.gen()).collect() }
    }

    /// Reads `width` bits starting at `offset` as an integer, first bit most significant.
    pub fn field(&self, offset: usize, width: usize) -> u64 {
        self.bits[offset..offset + width].iter().fold(0, |acc, &b| acc << 1 | b as u64)
    }

    pub fn set_field(&mut self, offset: usize, width: usize, value: u64) {
        for i in 0..width {
            self.bits[offset + i] = (value >> (width - 1 - i)) & 1 == 1;
        }
    }

    /// Hex with `keyinput0` as the most significant bit, padded to whole digits.
    pub fn to_hex(&self) -> String {
        let digits = self.bits.len().div_ceil(4);
        let pad = digits * 4 - self.bits.len();
        let mut s = String::with_capacity(digits);
        let padded: Vec<bool> = std::iter::repeat(false).take(pad).chain(self.bits.iter().copied()).collect();
        for chunk in padded.chunks(4) {
            let v = chunk.iter().fold(0u32, |acc, &b| acc << 1 | b as u32);
            s.push(char::from_digit(v, 16).unwrap());
        }
        s
    }

    pub fn from_hex(text: &str, len: usize) -> Result<Key, LockError> {
        let t = text.trim();
        let t = t.strip_prefix("0x").unwrap_or(t);
        if t.is_empty() && len > 0 {
            return Err(LockError::BadKey("empty key".into()));
        }
        let mut bits = Vec::with_capacity(t.len() * 4);
        for ch in t.chars() {
            let v = ch.to_digit(16).ok_or_else(|| LockError::BadKey(format!("`{ch}` is not a hex digit")))?;
            bits.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
        }
        if bits.len() < len {
            return Err(LockError::BadKey(format!("{} hex digits cannot hold {len} bits", t.len())));
        }
        let extra = bits.len() - len;
        if bits[..extra].iter().any(|&b| b) {
            return Err(LockError::BadKey(format!("key value exceeds {len} bits")));
        }
        Ok(Key { bits: bits[extra..].to_vec() })
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Key {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum LockSpec {
    Sas(SasSpec),
    Sfll(SfllSpec),
}

impl LockSpec {
    /// Width of the locking input slice.
    pub fn n(&self) -> usize {
        match self {
            LockSpec::Sas(s) => s.n,
            LockSpec::Sfll(s) => s.n,
        }
    }

    pub fn input_slice(&self) -> &[String] {
        match self {
            LockSpec::Sas(s) => &s.input_slice,
            LockSpec::Sfll(s) => &s.input_slice,
        }
    }

    pub fn key_len(&self) -> usize {
        match self {
            LockSpec::Sas(s) => s.key_len(),
            LockSpec::Sfll(s) => s.key_len(),
        }
    }
}

/// A locked netlist with its metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockedCircuit {
    pub circuit: Circuit,
    pub scheme: Scheme,
    pub spec: LockSpec,
    pub correct_key: Key,
}

impl LockedCircuit {
    pub fn key_len(&self) -> usize {
        self.correct_key.len()
    }

    /// The locked circuit with `key` hardwired; its interface is the
    /// original one.
    pub fn bind_key(&self, key: &Key) -> Result<Circuit, LockError> {
        bind_key(&self.circuit, key)
    }

    /// Whether `key` leaves every block harmless by construction (`K1 = K2`
    /// per SAS block, or the protected cubes for SFLL-flex).
    pub fn is_structurally_correct(&self, key: &Key) -> bool {
        match &self.spec {
            LockSpec::Sas(s) => s.is_correct_key(key),
            LockSpec::Sfll(s) => s.is_correct_key(key),
        }
    }
}

/// Key inputs of `c`, in key-index order.
pub fn key_inputs(c: &Circuit) -> Vec<String> {
    let mut keys: Vec<(usize, String)> = c
        .input_names()
        .into_iter()
        .filter(|n| is_key_input(n))
        .map(|n| (n[KEY_PREFIX.len()..].parse().unwrap(), n.to_string()))
        .collect();
    keys.sort();
    keys.into_iter().map(|(_, n)| n).collect()
}

/// Binds `keyinput<i>` to `key.bits[i]` for every key input of `c`.
pub fn bind_key(c: &Circuit, key: &Key) -> Result<Circuit, LockError> {
    let names = key_inputs(c);
    if names.len() != key.len() {
        return Err(LockError::BadKey(format!("circuit has {} key inputs, key has {} bits", names.len(), key.len())));
    }
    let values: Vec<(String, bool)> = names.into_iter().zip(key.bits.iter().copied()).collect();
    Ok(c.bind_inputs(&values)?)
}

/// Deterministic ChaCha generator for `(seed, stream)`; independent streams
/// keep parallel work reproducible regardless of scheduling.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Values of the slice inputs of `c` as wire names, checked to exist.
pub(crate) fn require_wires(c: &Circuit, names: &[String]) -> Result<(), LockError> {
    for n in names {
        if c.find(n).is_none() {
            return Err(LockError::MissingWire(n.clone()));
        }
    }
    Ok(())
}

pub(crate) fn random_bits(rng: &mut impl Rng, n: usize) -> u64 {
    if n >= 64 {
        rng.gen()
    } else {
        rng.gen::<u64>() & ((1u64 << n) - 1)
    }
}

pub(crate) fn is_pow2(v: usize) -> bool {
    v != 0 && v & (v - 1) == 0
}

/// Default locking slice: the first `n` primary inputs.
pub fn default_slice(c: &Circuit, n: usize) -> Result<Vec<String>, LockError> {
    let names = c.input_names();
    if names.len() < n {
        return Err(invalid(format!("circuit has {} inputs, slice needs {n}", names.len())));
    }
    Ok(names[..n].iter().map(|s| s.to_string()).collect())
}

/// Default insertion wires: the drivers of the first `l` primary outputs
/// (the least significant ones for generated multipliers).
pub fn default_insertion_wires(c: &Circuit, l: usize) -> Result<Vec<String>, LockError> {
    let outs = c.output_names();
    if outs.is_empty() {
        return Err(invalid("circuit has no outputs"));
    }
    Ok((0..l).map(|j| outs[j % outs.len()].to_string()).collect())
}
