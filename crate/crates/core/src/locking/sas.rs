//! SAS blocks: an Anti-SAT core (`g`, `ḡ`, output AND) fed through the
//! redirection function `H` that gives chosen critical minterms a large
//! share of the wrong keys.

use std::collections::HashMap;

use super::partition::{assign_blocks, Partition};
use super::{
    invalid, is_pow2, key_input_name, require_wires, rng_for, Key, LockError, LockSpec, LockedCircuit, Scheme,
};
use crate::netlist::{Circuit, CircuitBuilder, GateKind, ZERO_WIRE};

/// Parameters of a SAS, RSAS, or Anti-SAT instance. Anti-SAT is the
/// degenerate case `m = 0`, where `H` passes every minterm through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SasSpec {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub x_g: u64,
    /// Sorted ascending.
    pub critical_minterms: Vec<u64>,
    /// `blocks[j]` is `Mʲ`, dealt round-robin from the sorted minterms.
    pub blocks: Vec<Vec<u64>>,
    /// `None` exactly when `m = 0`.
    pub partition: Option<Partition>,
    pub insertion_wires: Vec<String>,
    pub input_slice: Vec<String>,
    /// Per-bit XNOR mask for the comparators; only all-XOR (0) is built.
    pub polarity: u64,
}

impl SasSpec {
    /// Spec with a freshly generated partition.
    pub fn new(
        n: usize,
        l: usize,
        x_g: u64,
        critical_minterms: &[u64],
        input_slice: Vec<String>,
        insertion_wires: Vec<String>,
        partition_seed: u64,
    ) -> Result<SasSpec, LockError> {
        let m = critical_minterms.len();
        let partition = super::make_partition(critical_minterms, n, m, l, x_g, partition_seed)?;
        let mut sorted = critical_minterms.to_vec();
        sorted.sort_unstable();
        let spec = SasSpec {
            n,
            m,
            l,
            x_g,
            blocks: assign_blocks(&sorted, l),
            critical_minterms: sorted,
            partition: Some(partition),
            insertion_wires,
            input_slice,
            polarity: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn antisat(n: usize, x_g: u64, input_slice: Vec<String>, insertion_wire: String) -> Result<SasSpec, LockError> {
        let spec = SasSpec {
            n,
            m: 0,
            l: 1,
            x_g,
            critical_minterms: Vec::new(),
            blocks: vec![Vec::new()],
            partition: None,
            insertion_wires: vec![insertion_wire],
            input_slice,
            polarity: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Uses the first `n` inputs of `target` as the slice and the drivers of
    /// its first `l` outputs as insertion wires.
    pub fn for_circuit(
        target: &Circuit,
        n: usize,
        l: usize,
        x_g: u64,
        critical_minterms: &[u64],
        partition_seed: u64,
    ) -> Result<SasSpec, LockError> {
        let slice = super::default_slice(target, n)?;
        let wires = super::default_insertion_wires(target, l)?;
        if critical_minterms.is_empty() {
            if l != 1 {
                return Err(invalid("Anti-SAT uses a single block"));
            }
            return SasSpec::antisat(n, x_g, slice, wires[0].clone());
        }
        SasSpec::new(n, l, x_g, critical_minterms, slice, wires, partition_seed)
    }

    pub fn is_antisat(&self) -> bool {
        self.m == 0
    }

    pub fn key_len(&self) -> usize {
        2 * self.n * self.l
    }

    pub fn k1(&self, key: &Key, j: usize) -> u64 {
        key.field(2 * self.n * j, self.n)
    }

    pub fn k2(&self, key: &Key, j: usize) -> u64 {
        key.field(2 * self.n * j + self.n, self.n)
    }

    /// Key with the given `(K1, K2)` pair for every block.
    pub fn key_from_pairs(&self, pairs: &[(u64, u64)]) -> Key {
        assert_eq!(pairs.len(), self.l);
        let mut key = Key::zeros(self.key_len());
        for (j, &(k1, k2)) in pairs.iter().enumerate() {
            key.set_field(2 * self.n * j, self.n, k1);
            key.set_field(2 * self.n * j + self.n, self.n, k2);
        }
        key
    }

    /// `K1 = K2` in every block.
    pub fn is_correct_key(&self, key: &Key) -> bool {
        key.len() == self.key_len() && (0..self.l).all(|j| self.k1(key, j) == self.k2(key, j))
    }

    /// Block owning critical minterm `x`, with its index inside the block.
    pub fn block_of(&self, x: u64) -> Option<(usize, usize)> {
        self.blocks
            .iter()
            .enumerate()
            .find_map(|(j, b)| b.iter().position(|&c| c == x).map(|i| (j, i)))
    }

    pub fn validate(&self) -> Result<(), LockError> {
        let n = self.n;
        if !(1..=32).contains(&n) {
            return Err(invalid(format!("n = {n} outside 1..=32")));
        }
        let mask = (1u64 << n) - 1;
        if self.x_g & !mask != 0 {
            return Err(invalid(format!("x_g exceeds {n} bits")));
        }
        if self.polarity != 0 {
            return Err(invalid("only all-XOR polarity is supported"));
        }
        if self.input_slice.len() != n {
            return Err(invalid(format!("input slice has {} wires, n = {n}", self.input_slice.len())));
        }
        if self.insertion_wires.len() != self.l {
            return Err(invalid(format!("{} insertion wires for l = {}", self.insertion_wires.len(), self.l)));
        }
        if self.blocks.len() != self.l {
            return Err(invalid("block count differs from l"));
        }
        if self.m == 0 {
            if self.l != 1 || !self.critical_minterms.is_empty() || self.partition.is_some() {
                return Err(invalid("Anti-SAT (m = 0) takes one block, no minterms, no partition"));
            }
            return Ok(());
        }
        if !is_pow2(self.m) || !is_pow2(self.l) || self.l > self.m || self.m as u64 > 1u64 << n {
            return Err(invalid(format!("need powers of two with l <= m <= 2^n (m = {}, l = {})", self.m, self.l)));
        }
        if self.critical_minterms.len() != self.m {
            return Err(invalid("critical minterm count differs from m"));
        }
        if self.critical_minterms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("critical minterms must be distinct and sorted"));
        }
        if self.critical_minterms.iter().any(|x| x & !mask != 0) {
            return Err(invalid(format!("critical minterm exceeds {n} bits")));
        }
        if self.blocks != assign_blocks(&self.critical_minterms, self.l) {
            return Err(invalid("blocks must be the round-robin split of the sorted minterms"));
        }
        let p = self.partition.as_ref().ok_or_else(|| invalid("missing partition"))?;
        p.validate(n, &self.blocks, self.x_g)
    }
}

/// Reference model of block `j`: `g(X' ⊕ K1) ∧ ḡ(X' ⊕ K2)` with
/// `X' = H(X, K1)`.
pub fn sas_block_output(spec: &SasSpec, j: usize, x: u64, k1: u64, k2: u64) -> bool {
    let xp = redirect(spec, j, x, k1);
    (xp ^ k1) == spec.x_g && (xp ^ k2) != spec.x_g
}

/// `H`: non-critical minterms pass through; a critical minterm is steered
/// onto `x_g ⊕ K1` (so `g` fires) when `K1 ∈ K¹_X`, else onto the same value
/// with its LSB flipped (so `g` stays silent).
fn redirect(spec: &SasSpec, j: usize, x: u64, k1: u64) -> u64 {
    match spec.blocks[j].iter().position(|&c| c == x) {
        None => x,
        Some(i) => {
            let member = spec.partition.as_ref().expect("critical block has a partition").set_of(j, k1) == i;
            spec.x_g ^ k1 ^ (!member as u64)
        }
    }
}

/// Netlist of block `j` with inputs `x0…`, `k1_0…`, `k2_0…` (MSB first) and output `y`.
pub fn build_sas_block(spec: &SasSpec, j: usize) -> Circuit {
    build_block(spec, j, false)
}

struct BlockBuilder {
    b: CircuitBuilder,
    inverted: HashMap<String, String>,
}

impl BlockBuilder {
    fn not(&mut self, w: &str) -> String {
        if w == ZERO_WIRE {
            return self.one();
        }
        if let Some(n) = self.inverted.get(w) {
            return n.clone();
        }
        let n = self.b.fresh_gate(&format!("{w}_n"), GateKind::Not, [w]);
        self.inverted.insert(w.to_string(), n.clone());
        n
    }

    fn one(&mut self) -> String {
        if !self.b.is_defined("one") {
            self.b.gate("one", GateKind::Not, [ZERO_WIRE]);
        }
        "one".to_string()
    }

    /// `w` if `bit`, else `¬w`.
    fn literal(&mut self, w: &str, bit: bool) -> String {
        if bit {
            w.to_string()
        } else {
            self.not(w)
        }
    }

    /// AND/OR/XOR of any number of operands; empty lists give the identity.
    fn reduce(&mut self, base: &str, kind: GateKind, ops: Vec<String>) -> String {
        match ops.len() {
            0 => match kind {
                GateKind::And => self.one(),
                _ => ZERO_WIRE.to_string(),
            },
            1 => ops.into_iter().next().unwrap(),
            _ => self.b.fresh_gate(base, kind, ops),
        }
    }

    fn detector(&mut self, base: &str, xs: &[String], value: u64) -> String {
        let n = xs.len();
        let lits: Vec<String> = (0..n).map(|i| self.literal(&xs[i], (value >> (n - 1 - i)) & 1 == 1)).collect();
        self.reduce(base, GateKind::And, lits)
    }
}

/// Shared-node BDD of a Boolean function over `vars` (first variable is the
/// MSB of the table index), realized as a mux netlist.
struct BddNetlist<'a> {
    vars: &'a [String],
    unique: HashMap<(usize, String, String), String>,
}

impl BddNetlist<'_> {
    fn build(&mut self, bb: &mut BlockBuilder, f: &dyn Fn(usize) -> bool, level: usize, offset: usize) -> String {
        let n = self.vars.len();
        if level == n {
            return if f(offset) { bb.one() } else { ZERO_WIRE.to_string() };
        }
        let lo = self.build(bb, f, level + 1, offset);
        let hi = self.build(bb, f, level + 1, offset + (1 << (n - 1 - level)));
        if lo == hi {
            return lo;
        }
        let key = (level, lo.clone(), hi.clone());
        if let Some(w) = self.unique.get(&key) {
            return w.clone();
        }
        let v = self.vars[level].clone();
        let zero = ZERO_WIRE;
        let one = bb.one();
        let w = if lo == zero && hi == one {
            v
        } else if lo == one && hi == zero {
            bb.not(&v)
        } else if lo == zero {
            bb.b.fresh_gate("bdd", GateKind::And, [v.as_str(), hi.as_str()])
        } else if hi == zero {
            let nv = bb.not(&v);
            bb.b.fresh_gate("bdd", GateKind::And, [nv.as_str(), lo.as_str()])
        } else if lo == one {
            let nv = bb.not(&v);
            bb.b.fresh_gate("bdd", GateKind::Or, [nv.as_str(), hi.as_str()])
        } else if hi == one {
            bb.b.fresh_gate("bdd", GateKind::Or, [v.as_str(), lo.as_str()])
        } else {
            let nv = bb.not(&v);
            let a = bb.b.fresh_gate("bdd_hi", GateKind::And, [v.as_str(), hi.as_str()]);
            let c = bb.b.fresh_gate("bdd_lo", GateKind::And, [nv.as_str(), lo.as_str()]);
            bb.b.fresh_gate("bdd", GateKind::Or, [a, c])
        };
        self.unique.insert(key, w.clone());
        w
    }
}

pub(crate) fn build_block(spec: &SasSpec, j: usize, restore_inversion: bool) -> Circuit {
    let n = spec.n;
    let mut bb = BlockBuilder { b: CircuitBuilder::new(format!("sas_block{j}")), inverted: HashMap::new() };
    let xs: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let k1: Vec<String> = (0..n).map(|i| format!("k1_{i}")).collect();
    let k2: Vec<String> = (0..n).map(|i| format!("k2_{i}")).collect();
    for w in xs.iter().chain(&k1).chain(&k2) {
        bb.b.input(w);
    }
    let xg_bit = |i: usize| (spec.x_g >> (n - 1 - i)) & 1 == 1;
    let block = &spec.blocks[j];

    let (xp, crit): (Vec<String>, Option<String>) = if block.is_empty() {
        (xs.clone(), None)
    } else {
        let partition = spec.partition.as_ref().expect("critical block has a partition");
        let dets: Vec<String> = block.iter().enumerate().map(|(i, &x)| bb.detector(&format!("det{i}"), &xs, x)).collect();
        let crit = bb.reduce("crit", GateKind::Or, dets.clone());
        let width = partition.code_width(j);
        let mut agree = vec![crit.clone()];
        let mut bdd = BddNetlist { vars: &k1, unique: HashMap::new() };
        for t in 0..width {
            let bit_of = |code: u64| (code >> (width - 1 - t)) & 1 == 1;
            let xsel: Vec<String> =
                (0..block.len()).filter(|&i| bit_of(partition.minterm_code(j, i))).map(|i| dets[i].clone()).collect();
            let xcode = bb.reduce(&format!("xcode{t}"), GateKind::Or, xsel);
            let kcode = match partition {
                Partition::Explicit { .. } => {
                    bdd.build(&mut bb, &|k: usize| bit_of(partition.key_code(j, k as u64)), 0, 0)
                }
                Partition::Linear { rows, .. } => {
                    let row = rows[j][t];
                    let sel: Vec<String> = (0..n).filter(|&i| (row >> (n - 1 - i)) & 1 == 1).map(|i| k1[i].clone()).collect();
                    bb.reduce(&format!("kcode{t}"), GateKind::Xor, sel)
                }
            };
            agree.push(bb.b.fresh_gate(&format!("agree{t}"), GateKind::Xnor, [kcode, xcode]));
        }
        let member = bb.reduce("member", GateKind::And, agree);
        let ncrit = bb.not(&crit);
        let xp = (0..n)
            .map(|i| {
                // Value steered in for critical minterms: x_g ⊕ K1, LSB flipped unless K1 ∈ K¹_X.
                let steer = if i == n - 1 {
                    let kind = if xg_bit(i) { GateKind::Xor } else { GateKind::Xnor };
                    bb.b.fresh_gate(&format!("steer{i}"), kind, [k1[i].as_str(), member.as_str()])
                } else {
                    bb.literal(&k1[i], !xg_bit(i))
                };
                let a = bb.b.fresh_gate(&format!("hsel{i}"), GateKind::And, [crit.as_str(), steer.as_str()]);
                let c = bb.b.fresh_gate(&format!("hpass{i}"), GateKind::And, [ncrit.as_str(), xs[i].as_str()]);
                bb.b.fresh_gate(&format!("xp{i}"), GateKind::Or, [a, c])
            })
            .collect();
        (xp, Some(crit))
    };

    let mut g_lits = Vec::with_capacity(n);
    let mut gbar_lits = Vec::with_capacity(n);
    for i in 0..n {
        let u = bb.b.fresh_gate(&format!("gin{i}"), GateKind::Xor, [xp[i].as_str(), k1[i].as_str()]);
        let v = bb.b.fresh_gate(&format!("gbin{i}"), GateKind::Xor, [xp[i].as_str(), k2[i].as_str()]);
        g_lits.push(bb.literal(&u, xg_bit(i)));
        gbar_lits.push(bb.literal(&v, xg_bit(i)));
    }
    let g = bb.reduce("g", GateKind::And, g_lits);
    let all = bb.reduce("gbar_eq", GateKind::And, gbar_lits);
    let gbar = bb.not(&all);
    let y_sas = bb.b.fresh_gate("y_sas", GateKind::And, [g, gbar]);
    match (restore_inversion, crit) {
        (true, Some(crit)) => bb.b.gate("y", GateKind::Xor, [y_sas, crit]),
        _ => bb.b.gate("y", GateKind::Buf, [y_sas]),
    };
    bb.b.output("y");
    bb.b.build().expect("block netlist is well formed").simplify()
}

/// One-output detector of a minterm set over inputs `x0…` (output `d`).
pub(crate) fn set_detector(n: usize, minterms: &[u64]) -> Circuit {
    let mut bb = BlockBuilder { b: CircuitBuilder::new("detector"), inverted: HashMap::new() };
    let xs: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    for x in &xs {
        bb.b.input(x);
    }
    let dets: Vec<String> = minterms.iter().enumerate().map(|(i, &v)| bb.detector(&format!("det{i}"), &xs, v)).collect();
    let d = bb.reduce("hit", GateKind::Or, dets);
    bb.b.gate("d", GateKind::Buf, [d]);
    bb.b.output("d");
    bb.b.build().expect("detector netlist is well formed").simplify()
}

fn slice_binding(spec_slice: &[String], extra: impl IntoIterator<Item = (String, String)>) -> HashMap<String, String> {
    let mut bind: HashMap<String, String> =
        spec_slice.iter().enumerate().map(|(i, w)| (format!("x{i}"), w.clone())).collect();
    bind.extend(extra);
    bind
}

pub(crate) fn check_target(c: &Circuit, slice: &[String], wires: &[String]) -> Result<(), LockError> {
    require_wires(c, slice)?;
    require_wires(c, wires)?;
    if let Some(s) = slice.iter().find(|s| c.input_position(s).is_none()) {
        return Err(invalid(format!("slice wire `{s}` is not a primary input")));
    }
    if let Some(k) = c.input_names().into_iter().find(|n| super::is_key_input(n)) {
        return Err(invalid(format!("target already has key input `{k}`")));
    }
    Ok(())
}

fn lock_blocks(c: &Circuit, spec: &SasSpec, seed: u64, scheme: Scheme) -> Result<LockedCircuit, LockError> {
    spec.validate()?;
    check_target(c, &spec.input_slice, &spec.insertion_wires)?;
    let n = spec.n;
    let rsas = scheme == Scheme::Rsas;
    let mut b = c.to_builder();
    for i in 0..spec.key_len() {
        b.input(key_input_name(i));
    }
    let mut block_outputs = Vec::with_capacity(spec.l);
    let mut body_outputs = Vec::with_capacity(spec.l);
    for j in 0..spec.l {
        let block = build_block(spec, j, rsas);
        let base = 2 * n * j;
        let keys = (0..n).flat_map(|i| {
            [(format!("k1_{i}"), key_input_name(base + i)), (format!("k2_{i}"), key_input_name(base + n + i))]
        });
        let names = b.instantiate(&block, &format!("sas{j}."), &slice_binding(&spec.input_slice, keys));
        block_outputs.push(names[block.outputs()[0]].clone());
        if rsas {
            let det = set_detector(n, &spec.blocks[j]);
            let names = b.instantiate(&det, &format!("rsas{j}.body."), &slice_binding(&spec.input_slice, []));
            body_outputs.push(names[det.outputs()[0]].clone());
        }
    }
    let mut locked = b.build()?;
    for (j, wire) in spec.insertion_wires.iter().enumerate() {
        if rsas {
            locked = locked.insert_xor_at_wire(wire, &body_outputs[j])?;
        }
        locked = locked.insert_xor_at_wire(wire, &block_outputs[j])?;
    }
    let mut rng = rng_for(seed, 0x6b65_79);
    let pairs: Vec<(u64, u64)> = (0..spec.l)
        .map(|_| {
            let k1 = super::random_bits(&mut rng, n);
            (k1, k1)
        })
        .collect();
    Ok(LockedCircuit {
        circuit: locked.renamed(format!("{}_{}", c.name(), scheme.to_string().to_lowercase())),
        scheme,
        correct_key: spec.key_from_pairs(&pairs),
        spec: LockSpec::Sas(spec.clone()),
    })
}

/// Instantiates the `l` SAS blocks of `spec` on its input slice and XORs each
/// block output into its insertion wire. The correct key has `K1 = K2` in
/// every block, with `K1` drawn from `seed`.
pub fn lock_sas(c: &Circuit, spec: &SasSpec, seed: u64) -> Result<LockedCircuit, LockError> {
    if spec.is_antisat() {
        return lock_blocks(c, spec, seed, Scheme::Antisat);
    }
    lock_blocks(c, spec, seed, Scheme::Sas)
}

/// As [`lock_sas`], but each insertion wire is additionally XORed with a
/// detector of `Mʲ` in the circuit body and every block output is inverted on
/// `Mʲ`, so the two inversions cancel only while the block is present.
pub fn lock_rsas(c: &Circuit, spec: &SasSpec, seed: u64) -> Result<LockedCircuit, LockError> {
    if spec.is_antisat() {
        return Err(invalid("RSAS needs critical minterms"));
    }
    lock_blocks(c, spec, seed, Scheme::Rsas)
}

/// Anti-SAT on the first `n` primary inputs.
pub fn lock_antisat(c: &Circuit, n: usize, x_g: u64, insertion_wire: &str, seed: u64) -> Result<LockedCircuit, LockError> {
    let spec = SasSpec::antisat(n, x_g, super::default_slice(c, n)?, insertion_wire.to_string())?;
    lock_blocks(c, &spec, seed, Scheme::Antisat)
}
