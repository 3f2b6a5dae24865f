//! Monte-Carlo model of the SAT attack in which every DI is drawn uniformly
//! from the minterms whose wrong-key family is not yet covered by the
//! families of earlier DIs (a covered minterm can no longer distinguish two
//! surviving keys). No netlist or key enumeration is involved: SAS families
//! are tracked as (block, `K1` set) and (block, single `K1` point) pairs.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::locking::{rng_for, SasSpec, SfllSpec};

/// Widest slice the model enumerates minterms for.
pub const MODEL_MAX_N: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid model input: {0}")]
    Invalid(String),
}

/// Wrong-key families as explicit bitsets: `families[x]` has bit `k` set
/// when wrong key `k` corrupts minterm `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitFamilies {
    pub num_keys: usize,
    pub families: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy)]
pub enum ModelTarget<'a> {
    Sas(&'a SasSpec),
    /// Fully specified cubes only (`k = n`).
    Sfll(&'a SfllSpec),
    Explicit(&'a ExplicitFamilies),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStats {
    pub trials: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub std_error: f64,
    pub min: u64,
    pub max: u64,
    pub histogram: BTreeMap<u64, u64>,
}

impl IterationStats {
    pub fn from_counts(counts: &[u64]) -> IterationStats {
        let trials = counts.len() as u64;
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / trials.max(1) as f64;
        let variance = if trials > 1 {
            counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
        } else {
            0.0
        };
        let mut histogram = BTreeMap::new();
        for &c in counts {
            *histogram.entry(c).or_insert(0) += 1;
        }
        IterationStats {
            trials,
            mean,
            variance,
            std_error: (variance / trials.max(1) as f64).sqrt(),
            min: counts.iter().copied().min().unwrap_or(0),
            max: counts.iter().copied().max().unwrap_or(0),
            histogram,
        }
    }
}

/// Precomputed structure shared by all trials.
enum Process<'a> {
    Sas {
        size: usize,
        blocks: usize,
        /// Flat `(block, set)` index of each critical minterm.
        critical: Vec<Option<usize>>,
        /// For each `(block, set)`, the non-critical minterms whose point
        /// family in that block lies inside the set.
        dependents: Vec<Vec<u32>>,
    },
    Sfll {
        size: usize,
        protected: Vec<bool>,
        c: usize,
    },
    Explicit(&'a ExplicitFamilies),
}

impl<'a> Process<'a> {
    fn new(target: ModelTarget<'a>) -> Result<Process<'a>, ModelError> {
        let bad = |m: String| ModelError::Invalid(m);
        match target {
            ModelTarget::Sas(spec) => {
                spec.validate().map_err(|e| bad(e.to_string()))?;
                if spec.n > MODEL_MAX_N {
                    return Err(bad(format!("n = {} exceeds the model limit {MODEL_MAX_N}", spec.n)));
                }
                let size = 1usize << spec.n;
                let per = spec.m / spec.l.max(1);
                let mut critical = vec![None; size];
                for (j, block) in spec.blocks.iter().enumerate() {
                    for (i, &x) in block.iter().enumerate() {
                        critical[x as usize] = Some(j * per + i);
                    }
                }
                let mut dependents = vec![Vec::new(); spec.m];
                if let Some(p) = &spec.partition {
                    for x in 0..size {
                        if critical[x].is_none() {
                            for j in 0..spec.l {
                                let i = p.set_of(j, x as u64 ^ spec.x_g);
                                dependents[j * per + i].push(x as u32);
                            }
                        }
                    }
                }
                Ok(Process::Sas { size, blocks: spec.l, critical, dependents })
            }
            ModelTarget::Sfll(spec) => {
                spec.validate().map_err(|e| bad(e.to_string()))?;
                if spec.k != spec.n {
                    return Err(bad("the SFLL-flex model covers fully specified cubes (k = n) only".into()));
                }
                if spec.n > MODEL_MAX_N {
                    return Err(bad(format!("n = {} exceeds the model limit {MODEL_MAX_N}", spec.n)));
                }
                let size = 1usize << spec.n;
                let protected = (0..size as u64).map(|x| spec.protected(x)).collect();
                Ok(Process::Sfll { size, protected, c: spec.c })
            }
            ModelTarget::Explicit(f) => {
                let words = f.num_keys.div_ceil(64);
                if f.families.iter().any(|fam| fam.len() != words) {
                    return Err(bad("family bitsets must all span num_keys".into()));
                }
                Ok(Process::Explicit(f))
            }
        }
    }

    /// One attack; returns the number of DIs and optionally their sequence.
    fn run(&self, rng: &mut impl Rng, mut trace: Option<&mut Vec<u64>>) -> u64 {
        let mut record = |x: usize| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(x as u64);
            }
        };
        match self {
            Process::Sas { size, blocks, critical, dependents } => {
                let mut pool = Pool::full(*size);
                let mut alive = vec![*blocks as u32; *size];
                let mut rounds = 0;
                while let Some(x) = pool.take_random(rng) {
                    rounds += 1;
                    record(x);
                    if let Some(set) = critical[x] {
                        for &d in &dependents[set] {
                            let d = d as usize;
                            alive[d] -= 1;
                            if alive[d] == 0 {
                                pool.remove(d);
                            }
                        }
                    }
                }
                rounds
            }
            Process::Sfll { size, protected, c } => {
                let mut pool = Pool::full(*size);
                let (mut rounds, mut hit) = (0, 0);
                while let Some(x) = pool.take_random(rng) {
                    rounds += 1;
                    record(x);
                    if protected[x] {
                        hit += 1;
                        if hit == *c {
                            // Every surviving key now holds exactly the protected cubes.
                            break;
                        }
                    }
                }
                rounds
            }
            Process::Explicit(f) => {
                let words = f.num_keys.div_ceil(64);
                let mut covered = vec![0u64; words];
                let mut chosen = vec![false; f.families.len()];
                let mut rounds = 0;
                loop {
                    let eligible: Vec<usize> = (0..f.families.len())
                        .filter(|&x| !chosen[x] && f.families[x].iter().zip(&covered).any(|(a, c)| a & !c != 0))
                        .collect();
                    if eligible.is_empty() {
                        return rounds;
                    }
                    let x = eligible[rng.gen_range(0..eligible.len())];
                    chosen[x] = true;
                    for (c, a) in covered.iter_mut().zip(&f.families[x]) {
                        *c |= a;
                    }
                    rounds += 1;
                    record(x);
                }
            }
        }
    }
}

/// Set of candidate minterms with O(1) uniform draw and removal.
struct Pool {
    items: Vec<u32>,
    pos: Vec<u32>,
}

impl Pool {
    fn full(size: usize) -> Pool {
        Pool { items: (0..size as u32).collect(), pos: (0..size as u32).collect() }
    }

    fn remove(&mut self, x: usize) {
        let p = self.pos[x];
        if p == u32::MAX {
            return;
        }
        let last = *self.items.last().unwrap();
        self.items.swap_remove(p as usize);
        if last as usize != x {
            self.pos[last as usize] = p;
        }
        self.pos[x] = u32::MAX;
    }

    fn take_random(&mut self, rng: &mut impl Rng) -> Option<usize> {
        if self.items.is_empty() {
            return None;
        }
        let x = self.items[rng.gen_range(0..self.items.len())] as usize;
        self.remove(x);
        Some(x)
    }
}

/// Runs `trials` independent model attacks in parallel. Trial `t` draws from
/// its own stream of `seed`, so results do not depend on the thread count.
pub fn model_attack_sim(target: ModelTarget<'_>, trials: u64, seed: u64) -> Result<IterationStats, ModelError> {
    if trials == 0 {
        return Err(ModelError::Invalid("trials must be at least 1".into()));
    }
    let process = Process::new(target)?;
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| process.run(&mut rng_for(seed, t), None))
        .collect();
    Ok(IterationStats::from_counts(&counts))
}

/// The DI sequence of trial `trial` (same stream as in [`model_attack_sim`]).
pub fn model_attack_trace(target: ModelTarget<'_>, seed: u64, trial: u64) -> Result<Vec<u64>, ModelError> {
    let process = Process::new(target)?;
    let mut trace = Vec::new();
    process.run(&mut rng_for(seed, trial), Some(&mut trace));
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn all_critical_takes_every_minterm() {
        let all: Vec<u64> = (0..16).collect();
        let spec = SasSpec::new(4, 1, 0, &all, slice(4), vec!["y".into()], 1).unwrap();
        let s = model_attack_sim(ModelTarget::Sas(&spec), 200, 3).unwrap();
        assert_eq!((s.min, s.max), (16, 16));
    }

    #[test]
    fn antisat_takes_every_minterm() {
        let spec = SasSpec::antisat(5, 0, slice(5), "y".into()).unwrap();
        let s = model_attack_sim(ModelTarget::Sas(&spec), 50, 3).unwrap();
        assert_eq!((s.min, s.max), (32, 32));
    }

    #[test]
    fn trace_matches_sim_stream() {
        let spec = SasSpec::new(6, 1, 0, &[3, 17], slice(6), vec!["y".into()], 1).unwrap();
        let trace = model_attack_trace(ModelTarget::Sas(&spec), 9, 0).unwrap();
        let one = model_attack_sim(ModelTarget::Sas(&spec), 1, 9).unwrap();
        assert_eq!(trace.len() as u64, one.min);
        assert!(trace.contains(&3) && trace.contains(&17));
    }

    #[test]
    fn sfll_model_requires_full_cubes() {
        let spec = SfllSpec::new(
            4,
            vec![crate::locking::Cube { value: 0b1000, care: 0b1100 }],
            slice(4),
            "y".into(),
        )
        .unwrap();
        assert!(model_attack_sim(ModelTarget::Sfll(&spec), 10, 0).is_err());
    }
}
