//! Combinational equivalence checking, by exhaustive simulation or by SAT on a miter.

use super::cnf::{encode_circuit, Signal};
use super::sim::{counting_words, valid_lanes};
use super::transform::check_same_interface;
use super::{build_miter, Assignment, Circuit, NetlistError};
use crate::sat::{ClauseSink, SatEngine, VarisatEngine};

pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivMode {
    /// Simulate all `2^w` inputs; fails if `w` exceeds `limit`.
    Exhaustive { limit: usize },
    Sat,
}

impl EquivMode {
    pub fn exhaustive() -> Self {
        EquivMode::Exhaustive { limit: DEFAULT_EXHAUSTIVE_LIMIT }
    }

    /// Exhaustive when the width allows it, SAT otherwise.
    pub fn auto(width: usize) -> Self {
        if width <= DEFAULT_EXHAUSTIVE_LIMIT {
            Self::exhaustive()
        } else {
            EquivMode::Sat
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equal,
    Counterexample(Assignment),
}

impl Equivalence {
    pub fn is_equal(&self) -> bool {
        matches!(self, Equivalence::Equal)
    }
}

pub fn check_equivalence(c1: &Circuit, c2: &Circuit, mode: EquivMode) -> Result<Equivalence, NetlistError> {
    check_same_interface(c1, c2)?;
    let width = c1.num_inputs();
    match mode {
        EquivMode::Exhaustive { limit } => {
            if width > limit {
                return Err(NetlistError::WidthLimit { width, limit });
            }
            let total: u64 = 1 << width;
            let mask = valid_lanes(width);
            let mut base = 0u64;
            while base < total {
                let words = counting_words(width, base);
                let (o1, o2) = (c1.eval_words(&words), c2.eval_words(&words));
                let diff = o1.iter().zip(&o2).fold(0u64, |acc, (a, b)| acc | (a ^ b)) & mask;
                if diff != 0 {
                    let pattern = base + diff.trailing_zeros() as u64;
                    return Ok(Equivalence::Counterexample(pattern_assignment(c1, pattern)));
                }
                base += 64;
            }
            Ok(Equivalence::Equal)
        }
        EquivMode::Sat => {
            let miter = build_miter(c1, c2)?;
            let mut engine = VarisatEngine::new();
            let inputs: Vec<Signal> = (0..width).map(|_| Signal::Lit(engine.new_var())).collect();
            let vals = encode_circuit(&mut engine, &miter, &inputs);
            match vals[miter.outputs()[0]] {
                Signal::Const(false) => return Ok(Equivalence::Equal),
                Signal::Const(true) => {}
                Signal::Lit(l) => engine.add_clause(&[l]),
            }
            if !engine.solve(&[]).map_err(|e| NetlistError::Engine(e.to_string()))? {
                return Ok(Equivalence::Equal);
            }
            let cex = c1
                .input_names()
                .into_iter()
                .zip(&inputs)
                .map(|(n, s)| {
                    let v = match *s {
                        Signal::Lit(l) => engine.value(l).unwrap_or(false),
                        Signal::Const(b) => b,
                    };
                    (n, v)
                })
                .collect();
            Ok(Equivalence::Counterexample(cex))
        }
    }
}

fn pattern_assignment(c: &Circuit, pattern: u64) -> Assignment {
    let w = c.num_inputs();
    c.input_names().into_iter().enumerate().map(|(i, n)| (n, (pattern >> (w - 1 - i)) & 1 == 1)).collect()
}
