//! Tseitin encoding of circuits into CNF.
//!
//! [`to_cnf`] is the textbook encoding with one variable per wire.
//! [`encode_circuit`] is the working encoder used by the attacks: inputs may
//! be bound to constants or existing literals, constants are propagated, and
//! `NOT`/`BUF` become literal aliases instead of new variables.

use std::collections::HashMap;
use std::ops::Not;

use serde::Serialize;

use super::{Circuit, Driver, GateKind};
use crate::sat::ClauseSink;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
    /// Variable of every wire, indexed by wire id.
    pub wire_vars: Vec<i32>,
    #[serde(skip)]
    names: HashMap<String, i32>,
}

impl CnfFormula {
    pub fn var_of(&self, wire: &str) -> Option<i32> {
        self.names.get(wire).copied()
    }

    pub fn to_dimacs(&self) -> String {
        self.clone().to_log().to_dimacs(&[])
    }

    pub fn to_log(self) -> crate::sat::ClauseLog {
        crate::sat::ClauseLog { num_vars: self.num_vars, clauses: self.clauses }
    }
}

pub fn to_cnf(c: &Circuit) -> CnfFormula {
    let mut log = crate::sat::ClauseLog::default();
    let wire_vars: Vec<i32> = c.wires().iter().map(|_| log.new_var()).collect();
    for (id, w) in c.wires().iter().enumerate() {
        let y = wire_vars[id];
        match &w.driver {
            Driver::Input => {}
            Driver::Zero => log.add_clause(&[-y]),
            Driver::Gate { kind, fanin } => {
                let ins: Vec<i32> = fanin.iter().map(|&f| wire_vars[f]).collect();
                tseitin_gate(&mut log, *kind, y, &ins);
            }
        }
    }
    let names = c.wires().iter().zip(&wire_vars).map(|(w, &v)| (w.name.clone(), v)).collect();
    CnfFormula { num_vars: log.num_vars, clauses: log.clauses, wire_vars, names }
}

fn tseitin_gate(sink: &mut impl ClauseSink, kind: GateKind, y: i32, ins: &[i32]) {
    match kind {
        GateKind::And => and_clauses(sink, y, ins),
        GateKind::Nand => and_clauses(sink, -y, ins),
        GateKind::Or => or_clauses(sink, y, ins),
        GateKind::Nor => or_clauses(sink, -y, ins),
        GateKind::Buf => {
            sink.add_clause(&[-y, ins[0]]);
            sink.add_clause(&[y, -ins[0]]);
        }
        GateKind::Not => {
            sink.add_clause(&[y, ins[0]]);
            sink.add_clause(&[-y, -ins[0]]);
        }
        GateKind::Xor | GateKind::Xnor => {
            let mut acc = ins[0];
            for (i, &b) in ins[1..].iter().enumerate() {
                let last = i + 2 == ins.len();
                let t = if last {
                    if kind == GateKind::Xor {
                        y
                    } else {
                        -y
                    }
                } else {
                    sink.new_var()
                };
                xor_clauses(sink, t, acc, b);
                acc = t;
            }
        }
    }
}

// y <-> AND(ins)
fn and_clauses(sink: &mut impl ClauseSink, y: i32, ins: &[i32]) {
    for &a in ins {
        sink.add_clause(&[-y, a]);
    }
    let mut big: Vec<i32> = ins.iter().map(|&a| -a).collect();
    big.push(y);
    sink.add_clause(&big);
}

// y <-> OR(ins)
fn or_clauses(sink: &mut impl ClauseSink, y: i32, ins: &[i32]) {
    for &a in ins {
        sink.add_clause(&[y, -a]);
    }
    let mut big: Vec<i32> = ins.to_vec();
    big.push(-y);
    sink.add_clause(&big);
}

// y <-> a XOR b
fn xor_clauses(sink: &mut impl ClauseSink, y: i32, a: i32, b: i32) {
    sink.add_clause(&[-y, a, b]);
    sink.add_clause(&[-y, -a, -b]);
    sink.add_clause(&[y, -a, b]);
    sink.add_clause(&[y, a, -b]);
}

/// A wire value during encoding: a known constant or a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Const(bool),
    Lit(i32),
}

impl Not for Signal {
    type Output = Signal;
    fn not(self) -> Signal {
        match self {
            Signal::Const(b) => Signal::Const(!b),
            Signal::Lit(l) => Signal::Lit(-l),
        }
    }
}

impl Signal {
    pub fn as_const(self) -> Option<bool> {
        match self {
            Signal::Const(b) => Some(b),
            Signal::Lit(_) => None,
        }
    }
}

pub fn encode_and(sink: &mut impl ClauseSink, ins: &[Signal]) -> Signal {
    let mut lits: Vec<i32> = Vec::with_capacity(ins.len());
    for s in ins {
        match *s {
            Signal::Const(false) => return Signal::Const(false),
            Signal::Const(true) => {}
            Signal::Lit(l) => {
                if lits.contains(&-l) {
                    return Signal::Const(false);
                }
                if !lits.contains(&l) {
                    lits.push(l);
                }
            }
        }
    }
    match lits.len() {
        0 => Signal::Const(true),
        1 => Signal::Lit(lits[0]),
        _ => {
            let y = sink.new_var();
            and_clauses(sink, y, &lits);
            Signal::Lit(y)
        }
    }
}

pub fn encode_or(sink: &mut impl ClauseSink, ins: &[Signal]) -> Signal {
    let neg: Vec<Signal> = ins.iter().map(|&s| !s).collect();
    !encode_and(sink, &neg)
}

pub fn encode_xor(sink: &mut impl ClauseSink, ins: &[Signal]) -> Signal {
    let mut parity = false;
    let mut acc: Option<i32> = None;
    for s in ins {
        match *s {
            Signal::Const(b) => parity ^= b,
            Signal::Lit(l) => {
                acc = match acc {
                    None => Some(l),
                    Some(a) if a == l => {
                        None
                    }
                    Some(a) if a == -l => {
                        parity = !parity;
                        None
                    }
                    Some(a) => {
                        let y = sink.new_var();
                        xor_clauses(sink, y, a, l);
                        Some(y)
                    }
                };
            }
        }
    }
    match acc {
        None => Signal::Const(parity),
        Some(l) => Signal::Lit(if parity { -l } else { l }),
    }
}

/// Encodes `c` with primary input `i` bound to `inputs[i]`; returns the
/// signal of every wire (indexed by wire id).
pub fn encode_circuit(sink: &mut impl ClauseSink, c: &Circuit, inputs: &[Signal]) -> Vec<Signal> {
    assert_eq!(inputs.len(), c.num_inputs(), "input signal count");
    let mut vals: Vec<Signal> = Vec::with_capacity(c.wires().len());
    vals.extend_from_slice(inputs);
    let mut buf: Vec<Signal> = Vec::new();
    for w in &c.wires()[c.num_inputs()..] {
        let v = match &w.driver {
            Driver::Zero => Signal::Const(false),
            Driver::Gate { kind, fanin } => {
                buf.clear();
                buf.extend(fanin.iter().map(|&f| vals[f]));
                match kind {
                    GateKind::Buf => buf[0],
                    GateKind::Not => !buf[0],
                    GateKind::And => encode_and(sink, &buf),
                    GateKind::Nand => !encode_and(sink, &buf),
                    GateKind::Or => encode_or(sink, &buf),
                    GateKind::Nor => !encode_or(sink, &buf),
                    GateKind::Xor => encode_xor(sink, &buf),
                    GateKind::Xnor => !encode_xor(sink, &buf),
                }
            }
            Driver::Input => unreachable!(),
        };
        vals.push(v);
    }
    vals
}
