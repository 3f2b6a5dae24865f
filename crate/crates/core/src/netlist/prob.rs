//! Signal probabilities under the input-independence approximation.

use std::collections::HashMap;

use super::{Circuit, Driver, GateKind};

/// Probability that each wire is 1 (indexed by wire id). Inputs missing from
/// `input_probs` default to 0.5. Multi-input gates fold left to right, which
/// is exact on fanout-free trees.
pub fn signal_probabilities(c: &Circuit, input_probs: &HashMap<String, f64>) -> Vec<f64> {
    let mut p: Vec<f64> = Vec::with_capacity(c.wires().len());
    for w in c.wires() {
        let v = match &w.driver {
            Driver::Input => input_probs.get(&w.name).copied().unwrap_or(0.5),
            Driver::Zero => 0.0,
            Driver::Gate { kind, fanin } => {
                let mut it = fanin.iter().map(|&f| p[f]);
                let first = it.next().unwrap_or(0.0);
                match kind {
                    GateKind::Buf => first,
                    GateKind::Not => 1.0 - first,
                    GateKind::And => it.fold(first, |a, b| a * b),
                    GateKind::Nand => 1.0 - it.fold(first, |a, b| a * b),
                    GateKind::Or => it.fold(first, |a, b| 1.0 - (1.0 - a) * (1.0 - b)),
                    GateKind::Nor => 1.0 - it.fold(first, |a, b| 1.0 - (1.0 - a) * (1.0 - b)),
                    GateKind::Xor => it.fold(first, |a, b| a + b - 2.0 * a * b),
                    GateKind::Xnor => 1.0 - it.fold(first, |a, b| a + b - 2.0 * a * b),
                }
            }
        };
        p.push(v);
    }
    p
}

pub fn skew(p: f64) -> f64 {
    p - 0.5
}
