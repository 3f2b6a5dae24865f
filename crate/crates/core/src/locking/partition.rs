//! Per-block partition of the `K1` space among a block's critical minterms.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{invalid, is_pow2, rng_for, LockError};

/// Widest slice for which the partition is stored as explicit `K1` sets.
pub const EXPLICIT_LIMIT: usize = 20;

/// For block `j` and its `i`-th critical minterm `X`, the set `K¹_X` of
/// `K1` values under which a wrong key corrupts `X` through that block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Partition {
    /// `sets[j][i]` lists `K¹_X`, natural key `X ⊕ x_g` first.
    Explicit { sets: Vec<Vec<Vec<u64>>>, table: Vec<Vec<u32>> },
    /// `K1` belongs to set `i` of block `j` iff the parities of `K1 & rows[j][b]`
    /// spell `codes[j][i]`. Used for slices too wide to enumerate.
    Linear { rows: Vec<Vec<u64>>, codes: Vec<Vec<u64>> },
}

fn parity_code(rows: &[u64], v: u64) -> u64 {
    rows.iter().fold(0, |acc, r| acc << 1 | ((r & v).count_ones() as u64 & 1))
}

impl Partition {
    pub fn from_sets(n: usize, sets: Vec<Vec<Vec<u64>>>) -> Result<Partition, LockError> {
        if n > EXPLICIT_LIMIT {
            return Err(invalid(format!("explicit partition needs n <= {EXPLICIT_LIMIT}")));
        }
        let size = 1usize << n;
        let mut table = Vec::with_capacity(sets.len());
        for (j, block) in sets.iter().enumerate() {
            let mut t = vec![u32::MAX; size];
            for (i, set) in block.iter().enumerate() {
                for &k in set {
                    let slot = t.get_mut(k as usize).ok_or_else(|| invalid(format!("K1 value {k:#x} exceeds {n} bits")))?;
                    if *slot != u32::MAX {
                        return Err(invalid(format!("block {j}: K1 value {k:#x} appears in two sets")));
                    }
                    *slot = i as u32;
                }
            }
            if t.contains(&u32::MAX) {
                return Err(invalid(format!("block {j}: sets do not cover the K1 space")));
            }
            table.push(t);
        }
        Ok(Partition::Explicit { sets, table })
    }

    pub fn num_blocks(&self) -> usize {
        match self {
            Partition::Explicit { sets, .. } => sets.len(),
            Partition::Linear { codes, .. } => codes.len(),
        }
    }

    /// Index (within block `j`) of the critical minterm whose set holds `k1`.
    pub fn set_of(&self, j: usize, k1: u64) -> usize {
        match self {
            Partition::Explicit { table, .. } => table[j][k1 as usize] as usize,
            Partition::Linear { rows, codes } => {
                let c = parity_code(&rows[j], k1);
                codes[j].iter().position(|&x| x == c).expect("linear partition codes are exhaustive")
            }
        }
    }

    /// Number of code bits the block netlist compares.
    pub fn code_width(&self, j: usize) -> usize {
        match self {
            Partition::Explicit { sets, .. } => sets[j].len().trailing_zeros() as usize,
            Partition::Linear { rows, .. } => rows[j].len(),
        }
    }

    /// Code of `k1` in block `j`.
    pub fn key_code(&self, j: usize, k1: u64) -> u64 {
        match self {
            Partition::Explicit { table, .. } => table[j][k1 as usize] as u64,
            Partition::Linear { rows, .. } => parity_code(&rows[j], k1),
        }
    }

    /// Code assigned to the `i`-th critical minterm of block `j`.
    pub fn minterm_code(&self, j: usize, i: usize) -> u64 {
        match self {
            Partition::Explicit { .. } => i as u64,
            Partition::Linear { codes, .. } => codes[j][i],
        }
    }

    /// Checks the partition invariants against a block assignment.
    pub fn validate(&self, n: usize, blocks: &[Vec<u64>], x_g: u64) -> Result<(), LockError> {
        if self.num_blocks() != blocks.len() {
            return Err(invalid("partition block count differs from l"));
        }
        for (j, block) in blocks.iter().enumerate() {
            let per = block.len();
            match self {
                Partition::Explicit { sets, .. } => {
                    if sets[j].len() != per {
                        return Err(invalid(format!("block {j}: {} sets for {per} minterms", sets[j].len())));
                    }
                    let want = (1usize << n) / per;
                    if let Some(bad) = sets[j].iter().position(|s| s.len() != want) {
                        return Err(invalid(format!("block {j}: set {bad} has size {} (want {want})", sets[j][bad].len())));
                    }
                }
                Partition::Linear { rows, codes } => {
                    if 1usize << rows[j].len() != per || codes[j].len() != per {
                        return Err(invalid(format!("block {j}: linear code width does not match m/l")));
                    }
                    let distinct: HashSet<u64> = codes[j].iter().copied().collect();
                    if distinct.len() != per || codes[j].iter().any(|&c| c >= per as u64) {
                        return Err(invalid(format!("block {j}: linear codes are not a permutation")));
                    }
                }
            }
            for (i, &x) in block.iter().enumerate() {
                if self.set_of(j, x ^ x_g) != i {
                    return Err(invalid(format!("block {j}: natural key of minterm {x:#x} lies outside its set")));
                }
            }
        }
        Ok(())
    }
}

/// Splits sorted critical minterms round-robin over `l` blocks.
pub fn assign_blocks(critical: &[u64], l: usize) -> Vec<Vec<u64>> {
    let mut sorted = critical.to_vec();
    sorted.sort_unstable();
    let mut blocks = vec![Vec::with_capacity(sorted.len() / l.max(1)); l];
    for (t, x) in sorted.into_iter().enumerate() {
        blocks[t % l].push(x);
    }
    blocks
}

/// Builds the `K1` partition for every block. Each set starts with the
/// minterm's natural key `X ⊕ x_g`; the remaining values are dealt out from a
/// seeded shuffle of the unclaimed ones. Slices wider than
/// [`EXPLICIT_LIMIT`] get a seeded random linear partition instead.
pub fn make_partition(
    critical_minterms: &[u64],
    n: usize,
    m: usize,
    l: usize,
    x_g: u64,
    seed: u64,
) -> Result<Partition, LockError> {
    if !(1..=32).contains(&n) {
        return Err(invalid(format!("n = {n} outside 1..=32")));
    }
    if !is_pow2(m) || !is_pow2(l) || l > m {
        return Err(invalid(format!("need m, l powers of two with l <= m (m = {m}, l = {l})")));
    }
    if m as u64 > 1u64 << n {
        return Err(invalid(format!("m = {m} does not divide 2^{n}")));
    }
    if critical_minterms.len() != m {
        return Err(invalid(format!("{} critical minterms given, m = {m}", critical_minterms.len())));
    }
    let distinct: HashSet<u64> = critical_minterms.iter().copied().collect();
    if distinct.len() != m {
        return Err(invalid("duplicate critical minterms"));
    }
    if let Some(x) = critical_minterms.iter().find(|&&x| x >> n != 0) {
        return Err(invalid(format!("minterm {x:#x} exceeds {n} bits")));
    }
    let blocks = assign_blocks(critical_minterms, l);
    let per = m / l;
    let mut rng = rng_for(seed, 0x7061_7274);

    if n <= EXPLICIT_LIMIT {
        let size = 1u64 << n;
        let set_size = (size / per as u64) as usize;
        let mut sets = Vec::with_capacity(l);
        for block in &blocks {
            let natural: Vec<u64> = block.iter().map(|&x| x ^ x_g).collect();
            let claimed: HashSet<u64> = natural.iter().copied().collect();
            assert_eq!(claimed.len(), natural.len(), "distinct minterms have distinct natural keys");
            let mut rest: Vec<u64> = (0..size).filter(|k| !claimed.contains(k)).collect();
            rest.shuffle(&mut rng);
            let mut it = rest.into_iter();
            let block_sets: Vec<Vec<u64>> = natural
                .iter()
                .map(|&k| std::iter::once(k).chain(it.by_ref().take(set_size - 1)).collect())
                .collect();
            sets.push(block_sets);
        }
        return Partition::from_sets(n, sets);
    }

    let width = per.trailing_zeros() as usize;
    let mask = (1u64 << n) - 1;
    let mut all_rows = Vec::with_capacity(l);
    let mut all_codes = Vec::with_capacity(l);
    for block in &blocks {
        let mut found = None;
        for _ in 0..10_000 {
            let rows: Vec<u64> = (0..width).map(|_| rng.gen::<u64>() & mask).collect();
            let codes: Vec<u64> = block.iter().map(|&x| parity_code(&rows, x ^ x_g)).collect();
            let distinct: HashSet<u64> = codes.iter().copied().collect();
            if distinct.len() == codes.len() {
                found = Some((rows, codes));
                break;
            }
        }
        let (rows, codes) = found.ok_or_else(|| invalid("no linear partition separates the natural keys"))?;
        all_rows.push(rows);
        all_codes.push(codes);
    }
    Ok(Partition::Linear { rows: all_rows, codes: all_codes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_partition_contains_natural_keys() {
        let p = make_partition(&[0b0011, 0b0101], 4, 2, 1, 0, 7).unwrap();
        let blocks = assign_blocks(&[0b0011, 0b0101], 1);
        p.validate(4, &blocks, 0).unwrap();
        let Partition::Explicit { sets, .. } = &p else { panic!() };
        assert_eq!(sets[0][0][0], 0b0011);
        assert_eq!(sets[0][1][0], 0b0101);
        assert_eq!(sets[0][0].len(), 8);
    }

    #[test]
    fn degenerate_sizes() {
        let p = make_partition(&[9], 4, 1, 1, 3, 1).unwrap();
        assert!((0..16).all(|k| p.set_of(0, k) == 0));
        let all: Vec<u64> = (0..16).collect();
        let p = make_partition(&all, 4, 16, 1, 5, 1).unwrap();
        for x in 0..16u64 {
            assert_eq!(p.set_of(0, x ^ 5), x as usize);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_partition(&[1, 1], 4, 2, 1, 0, 0).is_err());
        assert!(make_partition(&[1, 2, 3], 4, 3, 1, 0, 0).is_err());
        assert!(make_partition(&[1, 2], 4, 2, 4, 0, 0).is_err());
        assert!(make_partition(&[0, 1, 2, 3], 1, 4, 1, 0, 0).is_err());
    }

    #[test]
    fn wide_slices_use_linear_codes() {
        let crit = [1u64 << 30, 7, 99, 12345];
        let p = make_partition(&crit, 32, 4, 2, 0xdead, 3).unwrap();
        assert!(matches!(p, Partition::Linear { .. }));
        p.validate(32, &assign_blocks(&crit, 2), 0xdead).unwrap();
    }

    #[test]
    fn deterministic_per_seed() {
        let a = make_partition(&[3, 5, 6, 9], 5, 4, 1, 0, 11).unwrap();
        let b = make_partition(&[9, 6, 5, 3], 5, 4, 1, 0, 11).unwrap();
        assert_eq!(a, b);
    }
}
