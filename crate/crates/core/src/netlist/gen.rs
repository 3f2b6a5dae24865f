//! Generated benchmark circuits.

use rand::Rng;

use super::{Circuit, CircuitBuilder, GateKind, ZERO_WIRE};

/// Unsigned `na × nb` array multiplier. Inputs are declared most significant
/// bit first (`a{na-1} … a0 b{nb-1} … b0`), so the input minterm reads as
/// `a·2^nb + b`. Outputs `p0 … p{na+nb-1}` are listed least significant first.
pub fn array_multiplier(na: usize, nb: usize) -> Circuit {
    assert!(na >= 1 && nb >= 1);
    let mut b = CircuitBuilder::new(format!("mult{na}x{nb}"));
    for i in (0..na).rev() {
        b.input(format!("a{i}"));
    }
    for j in (0..nb).rev() {
        b.input(format!("b{j}"));
    }
    let width = na + nb;
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); width + 1];
    for i in 0..na {
        for j in 0..nb {
            let pp = b.fresh_gate(&format!("pp{i}_{j}"), GateKind::And, [format!("a{i}"), format!("b{j}")]);
            columns[i + j].push(pp);
        }
    }
    for col in 0..width {
        while columns[col].len() > 1 {
            let x = columns[col].remove(0);
            let y = columns[col].remove(0);
            if columns[col].is_empty() {
                let s = b.fresh_gate(&format!("hs{col}"), GateKind::Xor, [&x, &y]);
                let c = b.fresh_gate(&format!("hc{col}"), GateKind::And, [&x, &y]);
                columns[col].push(s);
                columns[col + 1].push(c);
            } else {
                let z = columns[col].remove(0);
                let t = b.fresh_gate(&format!("ft{col}"), GateKind::Xor, [&x, &y]);
                let s = b.fresh_gate(&format!("fs{col}"), GateKind::Xor, [&t, &z]);
                let g = b.fresh_gate(&format!("fg{col}"), GateKind::And, [&x, &y]);
                let p = b.fresh_gate(&format!("fp{col}"), GateKind::And, [&t, &z]);
                let c = b.fresh_gate(&format!("fc{col}"), GateKind::Or, [&g, &p]);
                columns[col].push(s);
                columns[col + 1].push(c);
            }
        }
        let out = format!("p{col}");
        match columns[col].first() {
            Some(src) => b.gate(&out, GateKind::Buf, [src.as_str()]),
            None => b.gate(&out, GateKind::Buf, [ZERO_WIRE]),
        };
        b.output(out);
    }
    b.build().expect("generated multiplier is well formed")
}

/// `n`-input AND of literals that is 1 only on `value` (`x0` is the most
/// significant bit).
pub fn point_function(n: usize, value: u64) -> Circuit {
    let mut b = CircuitBuilder::new(format!("point{n}"));
    let mut lits = Vec::with_capacity(n);
    for i in 0..n {
        let x = format!("x{i}");
        b.input(&x);
        if (value >> (n - 1 - i)) & 1 == 1 {
            lits.push(x);
        } else {
            lits.push(b.fresh_gate(&format!("nx{i}"), GateKind::Not, [x]));
        }
    }
    if n == 1 {
        b.gate("y", GateKind::Buf, lits);
    } else {
        b.gate("y", GateKind::And, lits);
    }
    b.output("y");
    b.build().expect("generated point function is well formed")
}

/// Random acyclic circuit over `inputs` inputs and `gates` gates; the last
/// `outputs` gates are primary outputs. Binary gates draw 2 or 3 fanins.
pub fn random_circuit(rng: &mut impl Rng, inputs: usize, gates: usize, outputs: usize) -> Circuit {
    assert!(inputs >= 1 && gates >= outputs && outputs >= 1);
    let mut b = CircuitBuilder::new("random");
    let mut wires: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
    for w in &wires {
        b.input(w);
    }
    for g in 0..gates {
        let kind = GateKind::ALL[rng.gen_range(0..GateKind::ALL.len())];
        let arity = if kind.is_unary() { 1 } else { rng.gen_range(2..=3) };
        let fanin: Vec<String> = (0..arity).map(|_| wires[rng.gen_range(0..wires.len())].clone()).collect();
        let name = format!("g{g}");
        b.gate(&name, kind, fanin);
        wires.push(name);
    }
    for o in gates - outputs..gates {
        b.output(format!("g{o}"));
    }
    b.build().expect("random circuit is acyclic by construction")
}
