//! Attacks on locked circuits: the oracle-guided SAT attack (exact and
//! early-terminating), the signal-probability removal attack, and a
//! Monte-Carlo model of the SAT attack under uniformly random DIs.

mod model;
mod removal;
mod sat_attack;

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::locking::{LockError, LockedCircuit};
use crate::netlist::{Circuit, NetlistError};

pub use model::{
    model_attack_sim, model_attack_trace, ExplicitFamilies, IterationStats, ModelError, ModelTarget,
};
pub use removal::{removal_attack, removal_candidates, RemovalResult, RemovalTarget, SKEW_THRESHOLD};
pub use sat_attack::{
    approximate_sat_attack, sat_attack, ApproxConfig, ApproxResult, AttackConfig, AttackLimits, AttackResult, DiEntry,
    EngineMode, Termination,
};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("locked circuit has no key inputs")]
    NoKeyInputs,
    #[error("oracle interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("satisfiability engine failure: {0}")]
    Engine(String),
    #[error("inconsistent attack state: {0}")]
    Inconsistent(String),
    #[error("cannot write CNF dump: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Lock(#[from] LockError),
}

/// Black-box access to a correctly working circuit. Queries are positional
/// over the oracle circuit's primary inputs and counted.
#[derive(Debug)]
pub struct Oracle {
    circuit: Circuit,
    queries: AtomicU64,
}

impl Oracle {
    pub fn new(circuit: Circuit) -> Oracle {
        Oracle { circuit, queries: AtomicU64::new(0) }
    }

    /// Oracle backed by `locked` with its correct key hardwired.
    pub fn from_locked(locked: &LockedCircuit) -> Result<Oracle, LockError> {
        Ok(Oracle::new(locked.bind_key(&locked.correct_key)?))
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.circuit.input_names()
    }

    pub fn query(&self, x: &[bool]) -> Vec<bool> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.circuit.eval_bits(x)
    }

    /// Answers 64 packed queries at once; counts as `lanes` queries.
    pub fn query_words(&self, x: &[u64], lanes: u32) -> Vec<u64> {
        self.queries.fetch_add(lanes as u64, Ordering::Relaxed);
        self.circuit.eval_words(x)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

/// Serializes a bit vector as a `0`/`1` string.
pub(crate) fn bitstring<S: serde::Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
    let text: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    s.serialize_str(&text)
}

/// Wilson score interval at 95% confidence for `hits` out of `n`.
pub fn wilson_interval(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
