//! Combinational gate-level netlists.
//!
//! A [`Circuit`] stores its wires in a canonical topological layout: primary
//! inputs first (in declaration order), then the reserved constant-zero wire
//! when it is referenced, then gates in a stable topological order. Every
//! gate's fanin ids are therefore strictly smaller than its own id, which is
//! what the simulators and encoders rely on.

mod bench;
mod cnf;
mod equiv;
pub mod gen;
mod prob;
mod sim;
mod transform;

use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{emit_bench, parse_bench, parse_bench_named};
pub use cnf::{encode_and, encode_circuit, encode_or, encode_xor, to_cnf, CnfFormula, Signal};
pub use equiv::{check_equivalence, EquivMode, Equivalence, DEFAULT_EXHAUSTIVE_LIMIT};
pub use prob::{signal_probabilities, skew};
pub use sim::{counting_words, simulate, simulate_batch, valid_lanes, Assignment};
pub use transform::build_miter;

/// Name of the implicit constant-0 source. BENCH has no constant literal, so
/// constants are written as `c = BUF(__zero)` / `c = NOT(__zero)`.
pub const ZERO_WIRE: &str = "__zero";

pub type WireId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unsupported construct `{construct}` (combinational netlists only)")]
    Unsupported { line: usize, construct: String },
    #[error("undefined wire `{name}`{}", fmt_line(*.line))]
    UndefinedWire { name: String, line: Option<usize> },
    #[error("duplicate definition of `{name}`{}", fmt_line(*.line))]
    DuplicateDefinition { name: String, line: Option<usize> },
    #[error("`{0}` is reserved")]
    ReservedName(String),
    #[error("gate `{wire}`: {kind} cannot take {arity} input(s)")]
    BadArity { wire: String, kind: GateKind, arity: usize },
    #[error("cyclic dependency through `{0}`")]
    Cycle(String),
    #[error("unknown wire `{0}`")]
    UnknownWire(String),
    #[error("inserting `{signal}` at `{wire}` would create a cycle")]
    WouldCycle { wire: String, signal: String },
    #[error("missing value for primary input `{0}`")]
    MissingInput(String),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("{width} inputs exceed the exhaustive limit of {limit}")]
    WidthLimit { width: usize, limit: usize },
    #[error("satisfiability engine failure: {0}")]
    Engine(String),
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
        }
    }

    /// Case-insensitive lookup. `BUFF` is accepted as the ISCAS spelling of `BUF`.
    pub fn from_name(s: &str) -> Option<Self> {
        let upper = s.to_ascii_uppercase();
        match upper.as_str() {
            "BUFF" => Some(GateKind::Buf),
            _ => GateKind::ALL.into_iter().find(|k| k.name() == upper),
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buf)
    }

    pub fn arity_ok(self, arity: usize) -> bool {
        if self.is_unary() {
            arity == 1
        } else {
            arity >= 2
        }
    }

    /// Evaluates the gate lane-wise on 64 packed patterns.
    #[inline]
    pub fn eval_words(self, mut ins: impl Iterator<Item = u64>) -> u64 {
        match self {
            GateKind::And => ins.fold(!0, |a, b| a & b),
            GateKind::Or => ins.fold(0, |a, b| a | b),
            GateKind::Nand => !ins.fold(!0, |a, b| a & b),
            GateKind::Nor => !ins.fold(0, |a, b| a | b),
            GateKind::Xor => ins.fold(0, |a, b| a ^ b),
            GateKind::Xnor => !ins.fold(0, |a, b| a ^ b),
            GateKind::Not => !ins.next().unwrap_or(0),
            GateKind::Buf => ins.next().unwrap_or(0),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Driver {
    Input,
    Zero,
    Gate { kind: GateKind, fanin: Vec<WireId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wire {
    pub name: String,
    pub driver: Driver,
}

/// An acyclic combinational netlist with named primary inputs and outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    name: String,
    wires: Vec<Wire>,
    num_inputs: usize,
    outputs: Vec<WireId>,
    index: HashMap<String, WireId>,
}

impl Circuit {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn wire(&self, id: WireId) -> &Wire {
        &self.wires[id]
    }

    pub fn wire_name(&self, id: WireId) -> &str {
        &self.wires[id].name
    }

    pub fn find(&self, name: &str) -> Option<WireId> {
        self.index.get(name).copied()
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Primary inputs occupy wire ids `0..num_inputs()`.
    pub fn inputs(&self) -> std::ops::Range<WireId> {
        0..self.num_inputs
    }

    pub fn outputs(&self) -> &[WireId] {
        &self.outputs
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.wires[..self.num_inputs].iter().map(|w| w.name.as_str()).collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|&o| self.wire_name(o)).collect()
    }

    pub fn input_position(&self, name: &str) -> Option<usize> {
        self.find(name).filter(|&id| id < self.num_inputs)
    }

    pub fn gate_count(&self) -> usize {
        self.wires.iter().filter(|w| matches!(w.driver, Driver::Gate { .. })).count()
    }

    pub fn zero_wire(&self) -> Option<WireId> {
        self.find(ZERO_WIRE)
    }

    /// Consumers of every wire, in ascending id order.
    pub fn fanouts(&self) -> Vec<Vec<WireId>> {
        let mut out = vec![Vec::new(); self.wires.len()];
        for (id, w) in self.wires.iter().enumerate() {
            if let Driver::Gate { fanin, .. } = &w.driver {
                for &f in fanin {
                    if out[f].last() != Some(&id) {
                        out[f].push(id);
                    }
                }
            }
        }
        out
    }

    /// Wires reachable forward from `roots` (roots included).
    pub fn transitive_fanout(&self, roots: &[WireId]) -> Vec<bool> {
        let mut mark = vec![false; self.wires.len()];
        for &r in roots {
            mark[r] = true;
        }
        for (id, w) in self.wires.iter().enumerate() {
            if let Driver::Gate { fanin, .. } = &w.driver {
                if fanin.iter().any(|&f| mark[f]) {
                    mark[id] = true;
                }
            }
        }
        mark
    }

    /// Wires that `roots` depend on (roots included).
    pub fn transitive_fanin(&self, roots: &[WireId]) -> Vec<bool> {
        let mut mark = vec![false; self.wires.len()];
        for &r in roots {
            mark[r] = true;
        }
        for id in (0..self.wires.len()).rev() {
            if !mark[id] {
                continue;
            }
            if let Driver::Gate { fanin, .. } = &self.wires[id].driver {
                for &f in fanin {
                    mark[f] = true;
                }
            }
        }
        mark
    }

    /// A builder holding this circuit's definitions, for name-level edits.
    pub fn to_builder(&self) -> CircuitBuilder {
        let mut b = CircuitBuilder::new(&self.name);
        for w in &self.wires[..self.num_inputs] {
            b.input(&w.name);
        }
        for &o in &self.outputs {
            b.output(self.wire_name(o));
        }
        for w in &self.wires[self.num_inputs..] {
            if let Driver::Gate { kind, fanin } = &w.driver {
                b.gate(&w.name, *kind, fanin.iter().map(|&f| self.wire_name(f)));
            }
        }
        b
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Circuit {
        self.name = name.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDef {
    pub output: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub line: Option<usize>,
}

/// Accumulates name-level definitions; [`CircuitBuilder::build`] validates
/// them and produces the canonical [`Circuit`] layout. Gates may reference
/// wires defined later.
#[derive(Debug, Clone, Default)]
pub struct CircuitBuilder {
    name: String,
    inputs: Vec<(String, Option<usize>)>,
    outputs: Vec<(String, Option<usize>)>,
    gates: Vec<GateDef>,
    taken: HashSet<String>,
    // Next suffix to try per fresh-name base.
    next_suffix: HashMap<String, usize>,
}

impl CircuitBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        CircuitBuilder { name: name.into(), ..Default::default() }
    }

    pub fn input(&mut self, name: impl Into<String>) -> &mut Self {
        self.input_at(name, None)
    }

    pub(crate) fn input_at(&mut self, name: impl Into<String>, line: Option<usize>) -> &mut Self {
        let name = name.into();
        self.taken.insert(name.clone());
        self.inputs.push((name, line));
        self
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push((name.into(), None));
        self
    }

    pub(crate) fn output_at(&mut self, name: impl Into<String>, line: Option<usize>) -> &mut Self {
        self.outputs.push((name.into(), line));
        self
    }

    pub fn gate<I, S>(&mut self, output: impl Into<String>, kind: GateKind, inputs: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.gate_at(output, kind, inputs, None)
    }

    pub(crate) fn gate_at<I, S>(
        &mut self,
        output: impl Into<String>,
        kind: GateKind,
        inputs: I,
        line: Option<usize>,
    ) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let output = output.into();
        self.taken.insert(output.clone());
        self.gates.push(GateDef {
            output,
            kind,
            inputs: inputs.into_iter().map(Into::into).collect(),
            line,
        });
        self
    }

    /// Adds a gate under a fresh name derived from `base` and returns that name.
    pub fn fresh_gate<I, S>(&mut self, base: &str, kind: GateKind, inputs: I) -> String
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = if !self.taken.contains(base) && base != ZERO_WIRE {
            base.to_string()
        } else {
            let start = self.next_suffix.get(base).copied().unwrap_or(1);
            let (i, name) = (start..)
                .map(|i| (i, format!("{base}_{i}")))
                .find(|(_, n)| !self.taken.contains(n))
                .expect("unbounded search");
            self.next_suffix.insert(base.to_string(), i + 1);
            name
        };
        self.gate(name.clone(), kind, inputs);
        name
    }

    /// A name not yet defined in this builder (`base`, else `base_1`, `base_2`, ...).
    pub fn fresh_name(&self, base: &str) -> String {
        if !self.taken.contains(base) && base != ZERO_WIRE {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|n| !self.taken.contains(n))
            .expect("unbounded search")
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.taken.contains(name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|(n, _)| n.as_str())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|(n, _)| n.as_str())
    }

    pub fn gates(&self) -> &[GateDef] {
        &self.gates
    }

    pub fn gates_mut(&mut self) -> &mut Vec<GateDef> {
        &mut self.gates
    }

    pub fn outputs_mut(&mut self) -> impl Iterator<Item = &mut String> {
        self.outputs.iter_mut().map(|(n, _)| n)
    }

    /// Removes the primary input `name` (its references must be redefined by a gate).
    pub fn remove_input(&mut self, name: &str) -> bool {
        let before = self.inputs.len();
        self.inputs.retain(|(n, _)| n != name);
        let removed = self.inputs.len() != before;
        if removed {
            self.taken.remove(name);
        }
        removed
    }

    pub fn build(&self) -> Result<Circuit, NetlistError> {
        // name -> definition site
        enum Def {
            Input,
            Gate,
        }
        let mut defs: HashMap<&str, Def> = HashMap::new();
        for (name, line) in &self.inputs {
            if name == ZERO_WIRE {
                return Err(NetlistError::ReservedName(name.clone()));
            }
            if defs.insert(name, Def::Input).is_some() {
                return Err(NetlistError::DuplicateDefinition { name: name.clone(), line: *line });
            }
        }
        for g in &self.gates {
            if g.output == ZERO_WIRE {
                return Err(NetlistError::ReservedName(g.output.clone()));
            }
            if !g.kind.arity_ok(g.inputs.len()) {
                return Err(NetlistError::BadArity {
                    wire: g.output.clone(),
                    kind: g.kind,
                    arity: g.inputs.len(),
                });
            }
            if defs.insert(&g.output, Def::Gate).is_some() {
                return Err(NetlistError::DuplicateDefinition {
                    name: g.output.clone(),
                    line: g.line,
                });
            }
        }
        let mut uses_zero = false;
        for g in &self.gates {
            for inp in &g.inputs {
                if inp == ZERO_WIRE {
                    uses_zero = true;
                } else if !defs.contains_key(inp.as_str()) {
                    return Err(NetlistError::UndefinedWire { name: inp.clone(), line: g.line });
                }
            }
        }
        let mut seen_outputs = HashSet::new();
        for (o, line) in &self.outputs {
            if o != ZERO_WIRE && !defs.contains_key(o.as_str()) {
                return Err(NetlistError::UndefinedWire { name: o.clone(), line: *line });
            }
            if !seen_outputs.insert(o.as_str()) {
                return Err(NetlistError::DuplicateDefinition { name: o.clone(), line: *line });
            }
        }

        // Outputs driven directly by a primary input (or the constant) get a BUF
        // so that every output is a gate output.
        let mut gates: Vec<GateDef> = self.gates.clone();
        let mut outputs: Vec<String> = Vec::with_capacity(self.outputs.len());
        let mut taken: HashSet<String> = self.taken.clone();
        for (o, _) in &self.outputs {
            let passthrough = o == ZERO_WIRE || matches!(defs.get(o.as_str()), Some(Def::Input));
            if passthrough {
                let base = format!("{}_po", o.trim_start_matches('_'));
                let name = if taken.contains(&base) {
                    (1..).map(|i| format!("{base}_{i}")).find(|n| !taken.contains(n)).unwrap()
                } else {
                    base
                };
                taken.insert(name.clone());
                uses_zero |= o == ZERO_WIRE;
                gates.push(GateDef { output: name.clone(), kind: GateKind::Buf, inputs: vec![o.clone()], line: None });
                outputs.push(name);
            } else {
                outputs.push(o.clone());
            }
        }

        // Stable topological order of gates (Kahn, smallest declaration index first).
        let gate_index: HashMap<&str, usize> =
            gates.iter().enumerate().map(|(i, g)| (g.output.as_str(), i)).collect();
        let mut pending = vec![0usize; gates.len()];
        let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
        for (i, g) in gates.iter().enumerate() {
            let deps: BTreeSet<usize> =
                g.inputs.iter().filter_map(|n| gate_index.get(n.as_str()).copied()).collect();
            pending[i] = deps.len();
            for d in deps {
                consumers[d].push(i);
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..gates.len()).filter(|&i| pending[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(gates.len());
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &c in &consumers[i] {
                pending[c] -= 1;
                if pending[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() != gates.len() {
            let stuck = (0..gates.len()).find(|&i| pending[i] > 0).unwrap();
            return Err(NetlistError::Cycle(gates[stuck].output.clone()));
        }

        let mut wires = Vec::with_capacity(self.inputs.len() + gates.len() + 1);
        let mut index = HashMap::with_capacity(wires.capacity());
        for (name, _) in &self.inputs {
            index.insert(name.clone(), wires.len());
            wires.push(Wire { name: name.clone(), driver: Driver::Input });
        }
        if uses_zero {
            index.insert(ZERO_WIRE.to_string(), wires.len());
            wires.push(Wire { name: ZERO_WIRE.to_string(), driver: Driver::Zero });
        }
        for &i in &order {
            let g = &gates[i];
            let fanin = g.inputs.iter().map(|n| index[n.as_str()]).collect();
            index.insert(g.output.clone(), wires.len());
            wires.push(Wire { name: g.output.clone(), driver: Driver::Gate { kind: g.kind, fanin } });
        }
        let outputs = outputs.iter().map(|o| index[o.as_str()]).collect();
        Ok(Circuit {
            name: self.name.clone(),
            wires,
            num_inputs: self.inputs.len(),
            outputs,
            index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_orders_gates_topologically() {
        let mut b = CircuitBuilder::new("t");
        b.input("a").input("b").output("y");
        b.gate("y", GateKind::And, ["t", "b"]);
        b.gate("t", GateKind::Not, ["a"]);
        let c = b.build().unwrap();
        assert_eq!(c.wire_name(2), "t");
        assert_eq!(c.wire_name(3), "y");
        assert_eq!(c.output_names(), vec!["y"]);
    }

    #[test]
    fn builder_rejects_cycles_and_bad_arity() {
        let mut b = CircuitBuilder::new("t");
        b.input("a").output("x");
        b.gate("x", GateKind::And, ["a", "y"]);
        b.gate("y", GateKind::Buf, ["x"]);
        assert!(matches!(b.build(), Err(NetlistError::Cycle(_))));

        let mut b = CircuitBuilder::new("t");
        b.input("a").output("x");
        b.gate("x", GateKind::And, ["a"]);
        assert!(matches!(b.build(), Err(NetlistError::BadArity { .. })));
    }

    #[test]
    fn passthrough_output_gets_buffer() {
        let mut b = CircuitBuilder::new("t");
        b.input("a").output("a");
        let c = b.build().unwrap();
        assert_eq!(c.gate_count(), 1);
        assert_eq!(c.output_names(), vec!["a_po"]);
    }

    #[test]
    fn gate_kind_names_are_case_insensitive() {
        assert_eq!(GateKind::from_name("xNoR"), Some(GateKind::Xnor));
        assert_eq!(GateKind::from_name("buff"), Some(GateKind::Buf));
        assert_eq!(GateKind::from_name("DFF"), None);
    }
}
