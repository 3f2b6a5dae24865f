//! SFLL-flex: the circuit is stripped (inverted) on `c` protected cubes and a
//! restore unit holding the cubes in its key re-inverts them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::sas::check_target;
use super::{invalid, key_input_name, Key, LockError, LockSpec, LockedCircuit, Scheme};
use crate::netlist::{Circuit, CircuitBuilder, GateKind};

/// A cube over the `n`-bit slice: bits under `care` must equal `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub value: u64,
    pub care: u64,
}

pub fn cube_matches(x: u64, cube: &Cube) -> bool {
    x & cube.care == cube.value
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SfllSpec {
    pub n: usize,
    pub c: usize,
    pub k: usize,
    pub cubes: Vec<Cube>,
    pub insertion_wire: String,
    pub input_slice: Vec<String>,
}

impl SfllSpec {
    pub fn new(n: usize, cubes: Vec<Cube>, input_slice: Vec<String>, insertion_wire: String) -> Result<SfllSpec, LockError> {
        let k = cubes.first().map_or(0, |c| c.care.count_ones() as usize);
        let spec = SfllSpec { n, c: cubes.len(), k, cubes, insertion_wire, input_slice };
        spec.validate()?;
        Ok(spec)
    }

    /// Fully specified cubes (`k = n`), one per minterm.
    pub fn from_minterms(n: usize, minterms: &[u64], input_slice: Vec<String>, insertion_wire: String) -> Result<SfllSpec, LockError> {
        let care = if n >= 64 { !0 } else { (1u64 << n) - 1 };
        let cubes = minterms.iter().map(|&value| Cube { value, care }).collect();
        SfllSpec::new(n, cubes, input_slice, insertion_wire)
    }

    pub fn key_len(&self) -> usize {
        self.c * self.k
    }

    pub fn validate(&self) -> Result<(), LockError> {
        let n = self.n;
        if !(1..=32).contains(&n) {
            return Err(invalid(format!("n = {n} outside 1..=32")));
        }
        if self.c == 0 || self.c != self.cubes.len() {
            return Err(invalid("need at least one cube and c = cube count"));
        }
        if self.k == 0 || self.k > n {
            return Err(invalid(format!("k = {} outside 1..=n", self.k)));
        }
        if self.input_slice.len() != n {
            return Err(invalid(format!("input slice has {} wires, n = {n}", self.input_slice.len())));
        }
        let mask = (1u64 << n) - 1;
        for cube in &self.cubes {
            if cube.care & !mask != 0 || cube.care.count_ones() as usize != self.k || cube.value & !cube.care != 0 {
                return Err(invalid(format!("cube {:#x}/{:#x} is not a {}-bit cube over {n} bits", cube.value, cube.care, self.k)));
            }
        }
        for (a, ca) in self.cubes.iter().enumerate() {
            for cb in &self.cubes[a + 1..] {
                if (ca.value ^ cb.value) & ca.care & cb.care == 0 {
                    return Err(invalid(format!(
                        "cubes {:#x}/{:#x} and {:#x}/{:#x} overlap",
                        ca.value, ca.care, cb.value, cb.care
                    )));
                }
            }
        }
        Ok(())
    }

    /// Slice positions of the care bits of cube `i`, MSB first.
    fn care_positions(&self, i: usize) -> Vec<usize> {
        let n = self.n;
        (0..n).filter(|&p| (self.cubes[i].care >> (n - 1 - p)) & 1 == 1).collect()
    }

    /// Cubes held by `key`: cube `i` keeps its care mask, its value comes
    /// from key bits `[i·k, (i+1)·k)`.
    pub fn key_cubes(&self, key: &Key) -> Vec<Cube> {
        let n = self.n;
        (0..self.c)
            .map(|i| {
                let mut value = 0;
                for (t, p) in self.care_positions(i).into_iter().enumerate() {
                    if key.bits[i * self.k + t] {
                        value |= 1 << (n - 1 - p);
                    }
                }
                Cube { value, care: self.cubes[i].care }
            })
            .collect()
    }

    pub fn key_for_cubes(&self, values: &[u64]) -> Key {
        let n = self.n;
        let mut key = Key::zeros(self.key_len());
        for (i, &v) in values.iter().enumerate() {
            for (t, p) in self.care_positions(i).into_iter().enumerate() {
                key.bits[i * self.k + t] = (v >> (n - 1 - p)) & 1 == 1;
            }
        }
        key
    }

    pub fn correct_key(&self) -> Key {
        let values: Vec<u64> = self.cubes.iter().map(|c| c.value).collect();
        self.key_for_cubes(&values)
    }

    pub fn is_correct_key(&self, key: &Key) -> bool {
        *key == self.correct_key()
    }

    /// Whether `x` is stripped (lies in a protected cube).
    pub fn protected(&self, x: u64) -> bool {
        self.cubes.iter().any(|c| cube_matches(x, c))
    }
}

/// Strips the protected cubes at the insertion wire and adds the keyed
/// restore unit at the same wire. Construction is deterministic; `_seed` is
/// accepted for interface uniformity.
pub fn lock_sfll_flex(c: &Circuit, spec: &SfllSpec, _seed: u64) -> Result<LockedCircuit, LockError> {
    spec.validate()?;
    check_target(c, &spec.input_slice, std::slice::from_ref(&spec.insertion_wire))?;
    let n = spec.n;
    let mut b = c.to_builder();
    for i in 0..spec.key_len() {
        b.input(key_input_name(i));
    }
    let mut nots: HashMap<String, String> = HashMap::new();
    let mut literal = |b: &mut CircuitBuilder, w: &str, bit: bool| -> String {
        if bit {
            w.to_string()
        } else {
            nots.entry(w.to_string()).or_insert_with(|| b.fresh_gate(&format!("sfll.{w}_n"), GateKind::Not, [w])).clone()
        }
    };
    let reduce = |b: &mut CircuitBuilder, base: &str, kind: GateKind, ops: Vec<String>| -> String {
        if ops.len() == 1 {
            b.fresh_gate(base, GateKind::Buf, ops)
        } else {
            b.fresh_gate(base, kind, ops)
        }
    };

    let mut strip_terms = Vec::with_capacity(spec.c);
    let mut restore_terms = Vec::with_capacity(spec.c);
    for (i, cube) in spec.cubes.iter().enumerate() {
        let positions = spec.care_positions(i);
        let lits: Vec<String> = positions
            .iter()
            .map(|&p| literal(&mut b, &spec.input_slice[p], (cube.value >> (n - 1 - p)) & 1 == 1))
            .collect();
        strip_terms.push(reduce(&mut b, &format!("sfll.strip{i}"), GateKind::And, lits));
        let eqs: Vec<String> = positions
            .iter()
            .enumerate()
            .map(|(t, &p)| {
                let key = key_input_name(i * spec.k + t);
                b.fresh_gate(&format!("sfll.ru{i}_{t}"), GateKind::Xnor, [spec.input_slice[p].as_str(), key.as_str()])
            })
            .collect();
        restore_terms.push(reduce(&mut b, &format!("sfll.ru{i}"), GateKind::And, eqs));
    }
    let strip = reduce(&mut b, "sfll.strip", GateKind::Or, strip_terms);
    let restore = reduce(&mut b, "sfll.restore", GateKind::Or, restore_terms);
    let locked = b
        .build()?
        .insert_xor_at_wire(&spec.insertion_wire, &strip)?
        .insert_xor_at_wire(&spec.insertion_wire, &restore)?;
    Ok(LockedCircuit {
        circuit: locked.renamed(format!("{}_sfll_flex", c.name())),
        scheme: Scheme::SfllFlex,
        correct_key: spec.correct_key(),
        spec: LockSpec::Sfll(spec.clone()),
    })
}
