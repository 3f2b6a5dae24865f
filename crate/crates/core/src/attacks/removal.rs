//! Removal attack: tie suspected locking-block outputs to 0 and clean up.

use std::collections::HashMap;

use serde::Serialize;

use super::AttackError;
use crate::locking::is_key_input;
use crate::netlist::{signal_probabilities, skew, Circuit, Driver, GateKind, NetlistError, WireId};

/// Minimum `|Pr[w = 1] − 0.5|` for a wire to look like a point-function output.
pub const SKEW_THRESHOLD: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemovalTarget {
    /// Pick block outputs by signal-probability skew.
    Auto,
    Wires(Vec<String>),
}

#[derive(Debug, Clone, Serialize)]
pub struct RemovalResult {
    #[serde(skip)]
    pub circuit: Circuit,
    /// Wires tied to 0, with their skew.
    pub removed: Vec<(String, f64)>,
    pub dropped_key_inputs: Vec<String>,
    pub remaining_key_inputs: usize,
}

/// Wires that look like locking-block outputs: key-dependent, skew beyond
/// [`SKEW_THRESHOLD`], and consumed by exactly one XOR/XNOR whose other
/// operands are key-independent and which feeds a primary output. Sorted by
/// most negative skew, then name.
pub fn removal_candidates(c: &Circuit) -> Vec<(WireId, f64)> {
    let keys: Vec<WireId> = c.inputs().filter(|&i| is_key_input(c.wire_name(i))).collect();
    let key_dep = c.transitive_fanout(&keys);
    let to_po = c.transitive_fanin(c.outputs());
    let probs = signal_probabilities(c, &HashMap::new());
    let fanouts = c.fanouts();
    let is_output = |w: WireId| c.outputs().contains(&w);
    let mut out: Vec<(WireId, f64)> = (c.num_inputs()..c.wires().len())
        .filter(|&w| key_dep[w] && !is_output(w))
        .filter(|&w| skew(probs[w]).abs() > SKEW_THRESHOLD)
        .filter(|&w| {
            let [consumer] = fanouts[w][..] else { return false };
            match &c.wire(consumer).driver {
                Driver::Gate { kind: GateKind::Xor | GateKind::Xnor, fanin } => {
                    to_po[consumer] && fanin.iter().filter(|&&f| f != w).all(|&f| !key_dep[f])
                }
                _ => false,
            }
        })
        .map(|w| (w, skew(probs[w])))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| c.wire_name(a.0).cmp(c.wire_name(b.0))));
    out
}

/// Ties the target wires to constant 0, folds constants, removes the dead
/// locking cone, and drops key inputs left without fanout.
pub fn removal_attack(locked: &Circuit, target: &RemovalTarget) -> Result<RemovalResult, AttackError> {
    let probs = signal_probabilities(locked, &HashMap::new());
    let removed: Vec<(String, f64)> = match target {
        RemovalTarget::Auto => removal_candidates(locked)
            .into_iter()
            .map(|(w, s)| (locked.wire_name(w).to_string(), s))
            .collect(),
        RemovalTarget::Wires(ws) => ws
            .iter()
            .map(|w| {
                let id = locked.find(w).ok_or_else(|| NetlistError::UnknownWire(w.clone()))?;
                Ok((w.clone(), skew(probs[id])))
            })
            .collect::<Result<_, AttackError>>()?,
    };
    let names: Vec<&str> = removed.iter().map(|(w, _)| w.as_str()).collect();
    let tied = locked.tie_to_zero(&names)?.simplify();
    let (circuit, dropped_key_inputs) = tied.drop_unused_inputs(is_key_input);
    let remaining_key_inputs = circuit.input_names().into_iter().filter(|n| is_key_input(n)).count();
    Ok(RemovalResult { circuit, removed, dropped_key_inputs, remaining_key_inputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locking::{lock_antisat, lock_rsas, lock_sas, SasSpec};
    use crate::netlist::{check_equivalence, gen, EquivMode, Equivalence};

    #[test]
    fn antisat_and_sas_are_removed_rsas_is_not() {
        let orig = gen::array_multiplier(3, 3);
        let anti = lock_antisat(&orig, 6, 0, "p0", 1).unwrap();
        let r = removal_attack(&anti.circuit, &RemovalTarget::Auto).unwrap();
        assert_eq!(r.remaining_key_inputs, 0);
        assert!(check_equivalence(&orig, &r.circuit, EquivMode::exhaustive()).unwrap().is_equal());

        let spec = SasSpec::for_circuit(&orig, 6, 1, 0, &[9, 42], 3).unwrap();
        let sas = lock_sas(&orig, &spec, 2).unwrap();
        let r = removal_attack(&sas.circuit, &RemovalTarget::Auto).unwrap();
        assert!(check_equivalence(&orig, &r.circuit, EquivMode::exhaustive()).unwrap().is_equal());

        let rsas = lock_rsas(&orig, &spec, 2).unwrap();
        let r = removal_attack(&rsas.circuit, &RemovalTarget::Auto).unwrap();
        assert_eq!(r.remaining_key_inputs, 0);
        let Equivalence::Counterexample(_) = check_equivalence(&orig, &r.circuit, EquivMode::exhaustive()).unwrap() else {
            panic!("RSAS removal should leave a corrupted circuit");
        };
    }

    #[test]
    fn explicit_wire_must_exist() {
        let orig = gen::array_multiplier(2, 2);
        assert!(removal_attack(&orig, &RemovalTarget::Wires(vec!["nope".into()])).is_err());
    }
}
