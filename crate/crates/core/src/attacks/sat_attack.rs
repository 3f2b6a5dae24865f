//! Oracle-guided SAT attack.
//!
//! Two copies of the locked circuit share the primary inputs `X` and carry
//! independent keys `Kα`, `Kβ`. Under the activation literal the formula also
//! demands that their outputs differ; each model yields a distinguishing
//! input, the oracle answers it, and both copies are constrained to
//! reproduce that answer. Once no DI is left, any key satisfying the
//! accumulated constraints is functionally correct.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use super::{bitstring, wilson_interval, AttackError, Oracle};
use crate::locking::{key_inputs, rng_for, Key};
use crate::netlist::{encode_circuit, encode_or, encode_xor, Circuit, Signal};
use crate::sat::{ClauseLog, ClauseSink, SatEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackLimits {
    pub max_iterations: u64,
    pub time_limit: Option<Duration>,
}

impl Default for AttackLimits {
    fn default() -> Self {
        AttackLimits { max_iterations: 1_000_000, time_limit: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    /// One engine for the whole run; the DI search is switched on and off
    /// through an assumption.
    #[default]
    Incremental,
    /// A new engine per solve, replaying the accumulated clauses.
    Fresh,
}

#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub limits: AttackLimits,
    pub mode: EngineMode,
    /// Writes the formula of every iteration as DIMACS into this directory.
    pub dump_cnf: Option<PathBuf>,
    /// Re-simulates both model keys on every logged DI each iteration.
    pub verify_models: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { limits: AttackLimits::default(), mode: EngineMode::Incremental, dump_cnf: None, verify_models: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiEntry {
    /// Values of the oracle's primary inputs, in its declaration order.
    #[serde(serialize_with = "bitstring")]
    pub input: Vec<bool>,
    #[serde(serialize_with = "bitstring")]
    pub output: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Exhausted,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackResult {
    pub recovered_key: Key,
    pub iterations: u64,
    pub di_log: Vec<DiEntry>,
    pub termination: Termination,
    #[serde(skip)]
    pub wall_time: Duration,
}

enum Role {
    Data(usize),
    Key(usize),
}

/// The locked circuit with its inputs classified against the oracle.
struct Problem<'a> {
    locked: &'a Circuit,
    roles: Vec<Role>,
    n_data: usize,
    n_keys: usize,
}

impl<'a> Problem<'a> {
    fn new(locked: &'a Circuit, oracle: &Oracle) -> Result<Problem<'a>, AttackError> {
        let keys = key_inputs(locked);
        if keys.is_empty() {
            return Err(AttackError::NoKeyInputs);
        }
        let data_names = oracle.input_names();
        let mut roles = Vec::with_capacity(locked.num_inputs());
        let mut seen = 0;
        for name in locked.input_names() {
            if let Some(k) = keys.iter().position(|k| k == name) {
                roles.push(Role::Key(k));
            } else {
                let pos = data_names.iter().position(|d| *d == name).ok_or_else(|| {
                    AttackError::InterfaceMismatch(format!("locked input `{name}` is not an oracle input"))
                })?;
                roles.push(Role::Data(pos));
                seen += 1;
            }
        }
        if seen != data_names.len() {
            return Err(AttackError::InterfaceMismatch("oracle has inputs the locked circuit lacks".into()));
        }
        if locked.num_outputs() != oracle.circuit().num_outputs() {
            return Err(AttackError::InterfaceMismatch("output counts differ".into()));
        }
        Ok(Problem { locked, roles, n_data: seen, n_keys: keys.len() })
    }

    fn encode(&self, sink: &mut impl ClauseSink, xs: &[Signal], ks: &[Signal]) -> Vec<Signal> {
        let inputs: Vec<Signal> = self
            .roles
            .iter()
            .map(|r| match *r {
                Role::Data(i) => xs[i],
                Role::Key(i) => ks[i],
            })
            .collect();
        let vals = encode_circuit(sink, self.locked, &inputs);
        self.locked.outputs().iter().map(|&o| vals[o]).collect()
    }

    /// Locked-circuit output words with `key` applied to 64 packed data patterns.
    fn eval_words(&self, data: &[u64], key: &[bool]) -> Vec<u64> {
        let words: Vec<u64> = self
            .roles
            .iter()
            .map(|r| match *r {
                Role::Data(i) => data[i],
                Role::Key(i) => {
                    if key[i] {
                        !0
                    } else {
                        0
                    }
                }
            })
            .collect();
        self.locked.eval_words(&words)
    }

    /// Whether `key` reproduces the oracle on every logged DI.
    fn consistent(&self, log: &[DiEntry], key: &[bool]) -> bool {
        log.chunks(64).all(|chunk| {
            let mut data = vec![0u64; self.n_data];
            let mut want = vec![0u64; self.locked.num_outputs()];
            for (lane, e) in chunk.iter().enumerate() {
                for (i, &b) in e.input.iter().enumerate() {
                    data[i] |= (b as u64) << lane;
                }
                for (o, &b) in e.output.iter().enumerate() {
                    want[o] |= (b as u64) << lane;
                }
            }
            let mask = if chunk.len() == 64 { !0 } else { (1u64 << chunk.len()) - 1 };
            let got = self.eval_words(&data, key);
            got.iter().zip(&want).all(|(g, w)| (g ^ w) & mask == 0)
        })
    }
}

/// Clause store shared by both engine modes.
struct Runner<E> {
    mode: EngineMode,
    engine: E,
    log: ClauseLog,
}

impl<E: SatEngine + Default> Runner<E> {
    fn solve(&mut self, assumptions: &[i32]) -> Result<bool, AttackError> {
        if self.mode == EngineMode::Fresh {
            self.engine = E::default();
            self.log.replay_into(&mut self.engine);
        }
        self.engine.solve(assumptions).map_err(|e| AttackError::Engine(e.to_string()))
    }

    fn values(&self, vars: &[i32]) -> Vec<bool> {
        vars.iter().map(|&v| self.engine.value(v).unwrap_or(false)).collect()
    }
}

impl<E: SatEngine> ClauseSink for Runner<E> {
    fn new_var(&mut self) -> i32 {
        let v = self.log.new_var();
        if self.mode == EngineMode::Incremental {
            let e = self.engine.new_var();
            debug_assert_eq!(e, v);
        }
        v
    }

    fn add_clause(&mut self, lits: &[i32]) {
        if self.mode == EngineMode::Incremental {
            self.engine.add_clause(lits);
        }
        self.log.add_clause(lits);
    }
}

/// State of an attack between iterations.
struct Session<'a, E> {
    problem: Problem<'a>,
    runner: Runner<E>,
    ka: Vec<i32>,
    kb: Vec<i32>,
    xs: Vec<i32>,
    act: i32,
    di_log: Vec<DiEntry>,
}

impl<'a, E: SatEngine + Default> Session<'a, E> {
    fn new(locked: &'a Circuit, oracle: &Oracle, mode: EngineMode) -> Result<Self, AttackError> {
        let problem = Problem::new(locked, oracle)?;
        let mut runner = Runner { mode, engine: E::default(), log: ClauseLog::default() };
        let xs: Vec<i32> = (0..problem.n_data).map(|_| runner.new_var()).collect();
        let ka: Vec<i32> = (0..problem.n_keys).map(|_| runner.new_var()).collect();
        let kb: Vec<i32> = (0..problem.n_keys).map(|_| runner.new_var()).collect();
        let sx: Vec<Signal> = xs.iter().map(|&v| Signal::Lit(v)).collect();
        let sa: Vec<Signal> = ka.iter().map(|&v| Signal::Lit(v)).collect();
        let sb: Vec<Signal> = kb.iter().map(|&v| Signal::Lit(v)).collect();
        let ya = problem.encode(&mut runner, &sx, &sa);
        let yb = problem.encode(&mut runner, &sx, &sb);
        let diffs: Vec<Signal> = ya.iter().zip(&yb).map(|(&a, &b)| encode_xor(&mut runner, &[a, b])).collect();
        let diff = encode_or(&mut runner, &diffs);
        let act = runner.new_var();
        match diff {
            Signal::Lit(d) => runner.add_clause(&[-act, d]),
            Signal::Const(true) => {}
            Signal::Const(false) => runner.add_clause(&[-act]),
        }
        Ok(Session { problem, runner, ka, kb, xs, act, di_log: Vec::new() })
    }

    /// Constrains the copy keyed by `key_vars` to answer `y` on `x`.
    fn constrain(&mut self, key_vars: &[i32], x: &[bool], y: &[bool]) {
        let sx: Vec<Signal> = x.iter().map(|&b| Signal::Const(b)).collect();
        let sk: Vec<Signal> = key_vars.iter().map(|&v| Signal::Lit(v)).collect();
        let outs = self.problem.encode(&mut self.runner, &sx, &sk);
        for (s, &want) in outs.iter().zip(y) {
            match *s {
                Signal::Const(b) if b != want => self.runner.add_clause(&[]),
                Signal::Const(_) => {}
                Signal::Lit(l) => self.runner.add_clause(&[if want { l } else { -l }]),
            }
        }
    }

    fn run(&mut self, oracle: &Oracle, config: &AttackConfig, start: Instant) -> Result<Termination, AttackError> {
        if let Some(dir) = &config.dump_cnf {
            fs::create_dir_all(dir)?;
        }
        loop {
            if self.di_log.len() as u64 >= config.limits.max_iterations {
                return Ok(Termination::IterationLimit);
            }
            if config.limits.time_limit.is_some_and(|t| start.elapsed() >= t) {
                return Ok(Termination::TimeLimit);
            }
            if let Some(dir) = &config.dump_cnf {
                let path = dir.join(format!("iter_{:06}.cnf", self.di_log.len()));
                fs::write(path, self.runner.log.to_dimacs(&[self.act]))?;
            }
            if !self.runner.solve(&[self.act])? {
                return Ok(Termination::Exhausted);
            }
            let x = self.runner.values(&self.xs);
            if config.verify_models {
                let (a, b) = (self.runner.values(&self.ka), self.runner.values(&self.kb));
                if !self.problem.consistent(&self.di_log, &a) || !self.problem.consistent(&self.di_log, &b) {
                    return Err(AttackError::Inconsistent("model key contradicts a logged DI".into()));
                }
                if self.di_log.iter().any(|e| e.input == x) {
                    return Err(AttackError::Inconsistent("repeated distinguishing input".into()));
                }
            }
            let y = oracle.query(&x);
            let (ka, kb) = (self.ka.clone(), self.kb.clone());
            self.constrain(&ka, &x, &y);
            self.constrain(&kb, &x, &y);
            self.di_log.push(DiEntry { input: x, output: y });
        }
    }

    /// A key consistent with every logged DI, preferring `hint` when possible.
    fn candidate_key(&mut self, hint: Option<&[bool]>) -> Result<Key, AttackError> {
        if let Some(h) = hint {
            let mut assumptions = vec![-self.act];
            assumptions.extend(self.ka.iter().zip(h).map(|(&v, &b)| if b { v } else { -v }));
            if self.runner.solve(&assumptions)? {
                return Ok(Key { bits: self.runner.values(&self.ka) });
            }
        }
        if !self.runner.solve(&[-self.act])? {
            return Err(AttackError::Inconsistent("no key reproduces the oracle on the logged DIs".into()));
        }
        Ok(Key { bits: self.runner.values(&self.ka) })
    }
}

/// Runs the SAT attack on `locked` (key inputs named `keyinput<i>`) against
/// `oracle`. On [`Termination::Exhausted`] the recovered key is functionally
/// correct; on a limit it is some key consistent with the DIs seen so far.
pub fn sat_attack<E: SatEngine + Default>(
    locked: &Circuit,
    oracle: &Oracle,
    config: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    let mut session: Session<E> = Session::new(locked, oracle, config.mode)?;
    let termination = session.run(oracle, config, start)?;
    let recovered_key = session.candidate_key(None)?;
    Ok(AttackResult {
        recovered_key,
        iterations: session.di_log.len() as u64,
        di_log: session.di_log,
        termination,
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct ApproxConfig {
    pub settle_window: u64,
    pub sample_count: u64,
    pub seed: u64,
    pub mode: EngineMode,
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxResult {
    pub attack: AttackResult,
    /// Fraction of sampled inputs on which the candidate key disagrees with the oracle.
    pub error_estimate: f64,
    pub error_interval: (f64, f64),
    pub samples: u64,
    pub mismatches: u64,
}

/// The SAT attack cut off after `settle_window` DIs. The returned key is a
/// seeded random key when that one is still consistent with the DIs, else any
/// consistent key; its error is estimated on `sample_count` random inputs.
pub fn approximate_sat_attack<E: SatEngine + Default>(
    locked: &Circuit,
    oracle: &Oracle,
    config: &ApproxConfig,
) -> Result<ApproxResult, AttackError> {
    let start = Instant::now();
    let mut session: Session<E> = Session::new(locked, oracle, config.mode)?;
    let attack_config = AttackConfig {
        limits: AttackLimits { max_iterations: config.settle_window, time_limit: config.time_limit },
        mode: config.mode,
        dump_cnf: None,
        verify_models: true,
    };
    let termination = session.run(oracle, &attack_config, start)?;
    let mut rng = rng_for(config.seed, 0x6170_7078);
    let hint: Vec<bool> = (0..session.problem.n_keys).map(|_| rng.gen()).collect();
    let key = match termination {
        Termination::Exhausted => session.candidate_key(None)?,
        _ => session.candidate_key(Some(&hint))?,
    };
    let mut mismatches = 0u64;
    let mut remaining = config.sample_count;
    while remaining > 0 {
        let lanes = remaining.min(64) as u32;
        let mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        let data: Vec<u64> = (0..session.problem.n_data).map(|_| rng.gen::<u64>()).collect();
        let got = session.problem.eval_words(&data, &key.bits);
        let want = oracle.query_words(&data, lanes);
        let diff = got.iter().zip(&want).fold(0u64, |acc, (g, w)| acc | (g ^ w)) & mask;
        mismatches += diff.count_ones() as u64;
        remaining -= lanes as u64;
    }
    let samples = config.sample_count;
    let error_estimate = if samples == 0 { 0.0 } else { mismatches as f64 / samples as f64 };
    Ok(ApproxResult {
        attack: AttackResult {
            recovered_key: key,
            iterations: session.di_log.len() as u64,
            di_log: session.di_log,
            termination,
            wall_time: start.elapsed(),
        },
        error_estimate,
        error_interval: wilson_interval(mismatches, samples),
        samples,
        mismatches,
    })
}
