//! Structural edits: miters, XOR insertion, constant binding, and cleanup.

use std::collections::HashMap;

use super::{Circuit, CircuitBuilder, Driver, GateKind, NetlistError, WireId, ZERO_WIRE};

pub(crate) fn check_same_interface(c1: &Circuit, c2: &Circuit) -> Result<(), NetlistError> {
    if c1.input_names() != c2.input_names() {
        return Err(NetlistError::InterfaceMismatch("primary input lists differ".into()));
    }
    if c1.num_outputs() != c2.num_outputs() {
        return Err(NetlistError::InterfaceMismatch(format!(
            "{} vs {} outputs",
            c1.num_outputs(),
            c2.num_outputs()
        )));
    }
    Ok(())
}

/// One-output circuit `miter` that is 1 exactly when `c1` and `c2` disagree
/// on some output. The copies are prefixed `m1.` and `m2.`.
pub fn build_miter(c1: &Circuit, c2: &Circuit) -> Result<Circuit, NetlistError> {
    check_same_interface(c1, c2)?;
    let mut b = CircuitBuilder::new(format!("miter_{}_{}", c1.name(), c2.name()));
    let mut bind = HashMap::new();
    for n in c1.input_names() {
        b.input(n);
        bind.insert(n.to_string(), n.to_string());
    }
    let n1 = b.instantiate(c1, "m1.", &bind);
    let n2 = b.instantiate(c2, "m2.", &bind);
    let diffs: Vec<String> = c1
        .outputs()
        .iter()
        .zip(c2.outputs())
        .enumerate()
        .map(|(i, (&o1, &o2))| b.fresh_gate(&format!("miter.d{i}"), GateKind::Xor, [&n1[o1], &n2[o2]]))
        .collect();
    let out = b.fresh_name("miter");
    match diffs.len() {
        0 => b.gate(&out, GateKind::Buf, [ZERO_WIRE]),
        1 => b.gate(&out, GateKind::Buf, [&diffs[0]]),
        _ => b.gate(&out, GateKind::Or, &diffs),
    };
    b.output(out);
    b.build()
}

impl CircuitBuilder {
    /// Copies the gates of `c` into this builder. Primary inputs of `c` are
    /// connected to the wires named in `bind`; every gate gets a fresh name
    /// starting with `prefix`. Returns the new name of each wire of `c`.
    pub fn instantiate(&mut self, c: &Circuit, prefix: &str, bind: &HashMap<String, String>) -> Vec<String> {
        let mut names: Vec<String> = Vec::with_capacity(c.wires().len());
        for w in c.wires() {
            let name = match &w.driver {
                Driver::Input => bind
                    .get(&w.name)
                    .unwrap_or_else(|| panic!("input `{}` of `{}` is not bound", w.name, c.name()))
                    .clone(),
                Driver::Zero => ZERO_WIRE.to_string(),
                Driver::Gate { kind, fanin } => {
                    let ins: Vec<&str> = fanin.iter().map(|&f| names[f].as_str()).collect();
                    self.fresh_gate(&format!("{prefix}{}", w.name), *kind, ins)
                }
            };
            names.push(name);
        }
        names
    }
}

/// Value of a wire after constant folding: a constant or a (possibly
/// inverted) reference to a wire of the rebuilt circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Folded {
    Const(bool),
    Ref(String, bool),
}

impl Circuit {
    /// Appends new primary inputs after the existing ones.
    pub fn with_inputs<S: AsRef<str>>(&self, names: &[S]) -> Result<Circuit, NetlistError> {
        let mut b = self.to_builder();
        for n in names {
            b.input(n.as_ref());
        }
        b.build()
    }

    /// XORs `signal` into `wire`: every consumer of `wire` (and the output
    /// list) reads `XOR(wire, signal)` afterwards. For a gate-driven wire the
    /// original driver is renamed and the XOR takes over the name.
    pub fn insert_xor_at_wire(&self, wire: &str, signal: &str) -> Result<Circuit, NetlistError> {
        let w = self.find(wire).filter(|&id| id != self.zero_wire().unwrap_or(usize::MAX));
        let w = w.ok_or_else(|| NetlistError::UnknownWire(wire.to_string()))?;
        let s = if signal == ZERO_WIRE { None } else { Some(signal) };
        if let Some(s) = s {
            let sid = self.find(s).ok_or_else(|| NetlistError::UnknownWire(s.to_string()))?;
            if self.transitive_fanout(&[w])[sid] {
                return Err(NetlistError::WouldCycle { wire: wire.into(), signal: signal.into() });
            }
        }
        let mut b = self.to_builder();
        if w < self.num_inputs() {
            let x = b.fresh_name(&format!("{wire}_x"));
            for g in b.gates_mut() {
                for i in &mut g.inputs {
                    if i == wire {
                        *i = x.clone();
                    }
                }
            }
            for o in b.outputs_mut() {
                if o == wire {
                    *o = x.clone();
                }
            }
            b.gate(x, GateKind::Xor, [wire, signal]);
        } else {
            let orig = b.fresh_name(&format!("{wire}_orig"));
            for g in b.gates_mut() {
                if g.output == wire {
                    g.output = orig.clone();
                }
            }
            b.gate(wire, GateKind::Xor, [orig.as_str(), signal]);
        }
        b.build()
    }

    /// Turns the named primary inputs into constants. The wires keep their
    /// names (`BUF(__zero)` or `NOT(__zero)`) and leave the input list.
    pub fn bind_inputs(&self, values: &[(String, bool)]) -> Result<Circuit, NetlistError> {
        let mut b = self.to_builder();
        for (name, v) in values {
            if !b.remove_input(name) {
                return Err(NetlistError::UnknownWire(name.clone()));
            }
            b.gate(name.as_str(), if *v { GateKind::Not } else { GateKind::Buf }, [ZERO_WIRE]);
        }
        b.build()
    }

    /// Redefines each named wire as constant 0.
    pub fn tie_to_zero<S: AsRef<str>>(&self, wires: &[S]) -> Result<Circuit, NetlistError> {
        let mut inputs = Vec::new();
        let mut b = self.to_builder();
        for w in wires {
            let w = w.as_ref();
            match self.find(w) {
                Some(id) if id < self.num_inputs() => inputs.push((w.to_string(), false)),
                Some(id) if matches!(self.wire(id).driver, Driver::Gate { .. }) => {
                    for g in b.gates_mut() {
                        if g.output == w {
                            g.kind = GateKind::Buf;
                            g.inputs = vec![ZERO_WIRE.to_string()];
                        }
                    }
                }
                _ => return Err(NetlistError::UnknownWire(w.to_string())),
            }
        }
        b.build()?.bind_inputs(&inputs)
    }

    /// Folds constants through the netlist, collapses buffers and inverters
    /// into their consumers, and removes gates that no output depends on.
    /// Primary inputs and output names are preserved.
    pub fn simplify(&self) -> Circuit {
        let mut b = CircuitBuilder::new(self.name());
        for n in self.input_names() {
            b.input(n);
        }
        let is_output: Vec<bool> = {
            let mut v = vec![false; self.wires().len()];
            for &o in self.outputs() {
                v[o] = true;
            }
            v
        };
        let mut inverted: HashMap<String, String> = HashMap::new();
        let mut vals: Vec<Folded> = Vec::with_capacity(self.wires().len());
        for (id, w) in self.wires().iter().enumerate() {
            let v = match &w.driver {
                Driver::Input => Folded::Ref(w.name.clone(), false),
                Driver::Zero => Folded::Const(false),
                Driver::Gate { kind, fanin } => {
                    let ins: Vec<Folded> = fanin.iter().map(|&f| vals[f].clone()).collect();
                    let folded = fold_gate(&mut b, &mut inverted, &w.name, *kind, ins);
                    if is_output[id] {
                        match &folded {
                            Folded::Const(c) => {
                                b.gate(w.name.as_str(), if *c { GateKind::Not } else { GateKind::Buf }, [ZERO_WIRE]);
                            }
                            Folded::Ref(src, neg) if *src != w.name => {
                                b.gate(w.name.as_str(), if *neg { GateKind::Not } else { GateKind::Buf }, [src.as_str()]);
                            }
                            _ => {}
                        }
                        Folded::Ref(w.name.clone(), false)
                    } else {
                        folded
                    }
                }
            };
            vals.push(v);
        }
        for &o in self.outputs() {
            b.output(self.wire_name(o));
        }
        let c = b.build().expect("folding preserves validity");
        c.remove_dead_gates()
    }

    /// Drops gates outside the transitive fanin of the outputs.
    pub fn remove_dead_gates(&self) -> Circuit {
        let live = self.transitive_fanin(self.outputs());
        let mut b = CircuitBuilder::new(self.name());
        for n in self.input_names() {
            b.input(n);
        }
        for &o in self.outputs() {
            b.output(self.wire_name(o));
        }
        for (id, w) in self.wires().iter().enumerate() {
            if let (true, Driver::Gate { kind, fanin }) = (live[id], &w.driver) {
                b.gate(w.name.as_str(), *kind, fanin.iter().map(|&f| self.wire_name(f)));
            }
        }
        b.build().expect("dead-gate removal preserves validity")
    }

    /// Removes primary inputs that feed nothing, restricted to those for
    /// which `removable` holds. Returns the pruned circuit and the removed names.
    pub fn drop_unused_inputs(&self, removable: impl Fn(&str) -> bool) -> (Circuit, Vec<String>) {
        let fo = self.fanouts();
        let dropped: Vec<String> = self
            .inputs()
            .filter(|&i| fo[i].is_empty() && removable(self.wire_name(i)))
            .map(|i| self.wire_name(i).to_string())
            .collect();
        let mut b = self.to_builder();
        for d in &dropped {
            b.remove_input(d);
        }
        (b.build().expect("unused inputs are unreferenced"), dropped)
    }

    /// Ids of the wires named in `names`.
    pub fn find_all<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<WireId>, NetlistError> {
        names
            .iter()
            .map(|n| self.find(n.as_ref()).ok_or_else(|| NetlistError::UnknownWire(n.as_ref().to_string())))
            .collect()
    }
}

fn operand(b: &mut CircuitBuilder, inverted: &mut HashMap<String, String>, f: &Folded) -> String {
    match f {
        Folded::Ref(n, false) => n.clone(),
        Folded::Ref(n, true) => inverted
            .entry(n.clone())
            .or_insert_with(|| b.fresh_gate(&format!("{n}_n"), GateKind::Not, [n.as_str()]))
            .clone(),
        Folded::Const(_) => unreachable!("constants are folded before materialization"),
    }
}

fn fold_gate(
    b: &mut CircuitBuilder,
    inverted: &mut HashMap<String, String>,
    name: &str,
    kind: GateKind,
    ins: Vec<Folded>,
) -> Folded {
    let negate = |f: Folded, on: bool| match f {
        Folded::Const(c) => Folded::Const(c ^ on),
        Folded::Ref(n, neg) => Folded::Ref(n, neg ^ on),
    };
    match kind {
        GateKind::Buf => ins.into_iter().next().unwrap(),
        GateKind::Not => negate(ins.into_iter().next().unwrap(), true),
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
            // AND/NAND: controlling value 0; OR/NOR: controlling value 1.
            let ctrl = matches!(kind, GateKind::Or | GateKind::Nor);
            let out_neg = matches!(kind, GateKind::Nand | GateKind::Nor);
            let mut rest: Vec<Folded> = Vec::new();
            for f in ins {
                match f {
                    Folded::Const(c) if c == ctrl => return Folded::Const(ctrl ^ out_neg),
                    Folded::Const(_) => {}
                    r => {
                        if !rest.contains(&r) {
                            rest.push(r);
                        }
                    }
                }
            }
            match rest.len() {
                0 => Folded::Const(!ctrl ^ out_neg),
                1 => negate(rest.pop().unwrap(), out_neg),
                _ => {
                    let ops: Vec<String> = rest.iter().map(|f| operand(b, inverted, f)).collect();
                    b.gate(name, kind, ops);
                    Folded::Ref(name.to_string(), false)
                }
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            let mut parity = kind == GateKind::Xnor;
            let mut rest: Vec<String> = Vec::new();
            for f in ins {
                match f {
                    Folded::Const(c) => parity ^= c,
                    Folded::Ref(n, neg) => {
                        parity ^= neg;
                        rest.push(n);
                    }
                }
            }
            match rest.len() {
                0 => Folded::Const(parity),
                1 => Folded::Ref(rest.pop().unwrap(), parity),
                _ => {
                    b.gate(name, if parity { GateKind::Xnor } else { GateKind::Xor }, rest);
                    Folded::Ref(name.to_string(), false)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{check_equivalence, parse_bench, EquivMode};
    use super::*;

    fn two_input_example() -> Circuit {
        parse_bench("INPUT(x0)\nINPUT(x1)\nOUTPUT(y)\nn0 = NOT(x0)\ny = AND(n0, x1)").unwrap()
    }

    #[test]
    fn miter_of_self_is_constant_zero() {
        let c = two_input_example();
        let m = build_miter(&c, &c).unwrap();
        for p in 0..4u8 {
            assert_eq!(m.eval_bits(&[p & 2 != 0, p & 1 != 0]), vec![false]);
        }
    }

    #[test]
    fn xor_insertion_with_constants() {
        let c = two_input_example();
        let with_s = c.with_inputs(&["s"]).unwrap().insert_xor_at_wire("y", "s").unwrap();
        for p in 0..4u8 {
            let (x0, x1) = (p & 2 != 0, p & 1 != 0);
            let y = !x0 && x1;
            assert_eq!(with_s.eval_bits(&[x0, x1, false]), vec![y]);
            assert_eq!(with_s.eval_bits(&[x0, x1, true]), vec![!y]);
        }
        let zero = c.insert_xor_at_wire("n0", ZERO_WIRE).unwrap();
        assert!(check_equivalence(&c, &zero, EquivMode::exhaustive()).unwrap().is_equal());
        let into_input = c.with_inputs(&["s"]).unwrap().insert_xor_at_wire("x1", "s").unwrap();
        assert_eq!(into_input.eval_bits(&[false, false, true]), vec![true]);
    }

    #[test]
    fn xor_insertion_rejects_cycles() {
        let c = two_input_example();
        assert!(matches!(c.insert_xor_at_wire("n0", "y"), Err(NetlistError::WouldCycle { .. })));
        assert!(matches!(c.insert_xor_at_wire("nope", "x0"), Err(NetlistError::UnknownWire(_))));
    }

    #[test]
    fn simplify_folds_tied_wires() {
        let c = parse_bench(
            "INPUT(a)\nINPUT(b)\nINPUT(k)\nOUTPUT(y)\nt = AND(a, k)\nz = XOR(t, b)\ny = XNOR(z, a)",
        )
        .unwrap();
        let s = c.tie_to_zero(&["t"]).unwrap().simplify();
        assert_eq!(s.output_names(), vec!["y"]);
        assert_eq!(s.gate_count(), 1);
        let (s, dropped) = s.drop_unused_inputs(|n| n == "k");
        assert_eq!(dropped, vec!["k".to_string()]);
        for p in 0..4u8 {
            let (a, b) = (p & 2 != 0, p & 1 != 0);
            assert_eq!(s.eval_bits(&[a, b]), vec![!(b ^ a)]);
        }
    }

    #[test]
    fn bind_inputs_keeps_names() {
        let c = parse_bench("INPUT(a)\nINPUT(k)\nOUTPUT(y)\ny = XOR(a, k)").unwrap();
        let bound = c.bind_inputs(&[("k".into(), true)]).unwrap();
        assert_eq!(bound.input_names(), vec!["a"]);
        assert_eq!(bound.eval_bits(&[false]), vec![true]);
    }
}
