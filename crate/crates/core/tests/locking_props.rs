use std::collections::BTreeSet;

use lockbench::locking::{
    bind_key, lock_rsas, lock_sas, lock_sfll_flex, sas_block_output, build_sas_block, Key, LockedCircuit, SasSpec,
    SfllSpec,
};
use lockbench::netlist::{check_equivalence, counting_words, gen, Circuit, EquivMode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mult_for(n: usize) -> Circuit {
    gen::array_multiplier(n.div_ceil(2), n / 2)
}

fn sas_spec(c: &Circuit, n: usize, l: usize, x_g: u64, critical: &[u64], seed: u64) -> SasSpec {
    SasSpec::for_circuit(c, n, l, x_g, critical, seed).unwrap()
}

fn mode_for(c: &Circuit) -> EquivMode {
    if c.num_inputs() <= 12 {
        EquivMode::exhaustive()
    } else {
        EquivMode::Sat
    }
}

fn assert_correct_key_restores(orig: &Circuit, locked: &LockedCircuit) {
    let bound = locked.bind_key(&locked.correct_key).unwrap();
    assert!(check_equivalence(orig, &bound, mode_for(orig)).unwrap().is_equal(), "{}", locked.scheme);
}

#[test]
fn correct_key_equivalence_every_scheme() {
    for (n, na, nb) in [(4, 2, 2), (6, 3, 3), (8, 4, 4), (10, 5, 5), (12, 6, 6), (12, 7, 7)] {
        let orig = gen::array_multiplier(na, nb);
        let spec = sas_spec(&orig, n, 2, 5, &[1, 2, 3, 9], 11);
        assert_correct_key_restores(&orig, &lock_sas(&orig, &spec, 1).unwrap());
        assert_correct_key_restores(&orig, &lock_rsas(&orig, &spec, 2).unwrap());
        let anti = SasSpec::for_circuit(&orig, n, 1, 3, &[], 0).unwrap();
        assert_correct_key_restores(&orig, &lock_sas(&orig, &anti, 3).unwrap());
        let slice = spec.input_slice.clone();
        let sfll = SfllSpec::from_minterms(n, &[6, 12], slice, "p1".into()).unwrap();
        assert_correct_key_restores(&orig, &lock_sfll_flex(&orig, &sfll, 4).unwrap());
    }
}

#[test]
fn harmless_keys_are_exactly_equal_halves() {
    for (n, critical) in [(4usize, vec![3u64, 12]), (4, vec![7]), (3, vec![1, 2, 4, 6]), (2, vec![2])] {
        let orig = mult_for(n.max(4));
        let spec = sas_spec(&orig, n, 1, 1, &critical, 5);
        let locked = lock_sas(&orig, &spec, 9).unwrap();
        for k in 0..1u64 << (2 * n) {
            let mut key = Key::zeros(2 * n);
            key.set_field(0, 2 * n, k);
            let bound = bind_key(&locked.circuit, &key).unwrap();
            let harmless = check_equivalence(&orig, &bound, EquivMode::exhaustive()).unwrap().is_equal();
            assert_eq!(harmless, k >> n == k & ((1 << n) - 1), "n={n} key={k:x}");
        }
    }
}

/// For each slice value, the K1 values of keys that corrupt it.
fn participating_k1(orig: &Circuit, locked: &LockedCircuit, n: usize) -> Vec<BTreeSet<u64>> {
    let mut sets = vec![BTreeSet::new(); 1 << n];
    let width = orig.num_inputs();
    for k1 in 0..1u64 << n {
        for k2 in 0..1u64 << n {
            let mut key = Key::zeros(2 * n);
            key.set_field(0, n, k1);
            key.set_field(n, n, k2);
            let bound = bind_key(&locked.circuit, &key).unwrap();
            for x in 0..1u64 << n {
                // Slice = first n inputs, the rest held at 0.
                let bits: Vec<bool> = (0..width).map(|i| i < n && (x >> (n - 1 - i)) & 1 == 1).collect();
                if bound.eval_bits(&bits) != orig.eval_bits(&bits) {
                    sets[x as usize].insert(k1);
                }
            }
        }
    }
    sets
}

#[test]
fn k1_participation_follows_partition() {
    let n = 4;
    let orig = mult_for(n);
    for (m, x_g) in [(1usize, 0u64), (2, 6), (4, 9), (8, 15), (16, 3)] {
        let critical: Vec<u64> = (0..m as u64).map(|i| (i * 5 + 1) % 16).collect();
        let spec = sas_spec(&orig, n, 1, x_g, &critical, 21);
        let locked = lock_sas(&orig, &spec, 1).unwrap();
        let sets = participating_k1(&orig, &locked, n);
        let partition = spec.partition.as_ref().unwrap();
        for x in 0..16u64 {
            let want: BTreeSet<u64> = match spec.block_of(x) {
                Some((j, i)) => (0..16).filter(|&k| partition.set_of(j, k) == i).collect(),
                None => [x ^ x_g].into_iter().collect(),
            };
            assert_eq!(sets[x as usize], want, "m={m} x={x}");
            if spec.block_of(x).is_some() {
                assert_eq!(want.len(), 16 / m);
                assert!(want.contains(&(x ^ x_g)));
            }
        }
    }
}

#[test]
fn rsas_matches_sas_on_full_space_n4() {
    let orig = mult_for(4);
    for l in [1usize, 2] {
        let spec = sas_spec(&orig, 4, l, 10, &[0, 5, 6, 13], 3);
        let sas = lock_sas(&orig, &spec, 8).unwrap();
        let rsas = lock_rsas(&orig, &spec, 8).unwrap();
        assert_eq!(sas.circuit.input_names(), rsas.circuit.input_names());
        // 4 data bits and 8l key bits: at most 2^20 assignments.
        let eq = check_equivalence(&sas.circuit, &rsas.circuit, EquivMode::Exhaustive { limit: 20 }).unwrap();
        assert!(eq.is_equal(), "l={l}");
    }
}

fn random_agreement(n: usize, l: usize, samples: u64) {
    let orig = mult_for(n);
    let critical: Vec<u64> = (0..4u64).map(|i| (i * 0x9e37_79b9 + 7) & ((1u64 << n) - 1)).collect();
    let spec = sas_spec(&orig, n, l, 0x1234 & ((1 << n) - 1), &critical, 17);
    let sas = lock_sas(&orig, &spec, 5).unwrap();
    let rsas = lock_rsas(&orig, &spec, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let width = sas.circuit.num_inputs();
    let mut done = 0;
    while done < samples {
        let mut words: Vec<u64> = (0..width).map(|_| rng.gen()).collect();
        // Put a critical minterm on lane 0 so the inverted path is exercised.
        for (i, w) in words.iter_mut().take(n).enumerate() {
            *w = (*w & !1) | ((critical[0] >> (n - 1 - i)) & 1);
        }
        assert_eq!(sas.circuit.eval_words(&words), rsas.circuit.eval_words(&words), "n={n}");
        done += 64;
    }
}

#[test]
fn rsas_matches_sas_on_random_samples() {
    random_agreement(16, 1, 1 << 17);
    random_agreement(16, 2, 1 << 16);
    random_agreement(32, 1, 1 << 16);
}

#[test]
fn block_netlist_matches_model_up_to_n6() {
    for (n, critical, l) in [(5usize, vec![1u64, 9, 17, 30], 2usize), (6, vec![0, 33], 1), (6, vec![5, 6, 7, 8, 40, 41, 42, 63], 4)]
    {
        let slice: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let wires = vec!["y".to_string(); l];
        let spec = SasSpec::new(n, l, 0b10101 & ((1 << n) - 1), &critical, slice, wires, 2).unwrap();
        for j in 0..l {
            let block = build_sas_block(&spec, j);
            let width = 3 * n;
            let mut base = 0u64;
            while base < 1 << width {
                let out = block.eval_words(&counting_words(width, base))[0];
                for lane in 0..64u64.min(1 << width) {
                    let v = base + lane;
                    let mask = (1u64 << n) - 1;
                    let (x, k1, k2) = (v >> (2 * n), (v >> n) & mask, v & mask);
                    assert_eq!((out >> lane) & 1 == 1, sas_block_output(&spec, j, x, k1, k2), "n={n} j={j} {v:x}");
                }
                base += 64;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_an_even_exact_cover(n in 2usize..=9, log_m in 0u32..=4, log_l in 0u32..=2, x_g in any::<u64>(), seed in any::<u64>()) {
        let m = 1usize << log_m.min(n as u32);
        let l = (1usize << log_l).min(m);
        let x_g = x_g & ((1 << n) - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut critical = BTreeSet::new();
        while critical.len() < m {
            critical.insert(rng.gen_range(0..1u64 << n));
        }
        let critical: Vec<u64> = critical.into_iter().collect();
        let slice: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let spec = SasSpec::new(n, l, x_g, &critical, slice, vec!["y".into(); l], seed).unwrap();
        let p = spec.partition.as_ref().unwrap();
        prop_assert_eq!(spec.blocks.iter().map(Vec::len).sum::<usize>(), m);
        for (j, block) in spec.blocks.iter().enumerate() {
            let mut sizes = vec![0usize; block.len()];
            for k in 0..1u64 << n {
                sizes[p.set_of(j, k)] += 1;
            }
            prop_assert!(sizes.iter().all(|&s| s == (1 << n) / block.len()), "{:?}", sizes);
            for (i, &x) in block.iter().enumerate() {
                prop_assert_eq!(p.set_of(j, x ^ x_g), i);
            }
        }
    }
}

#[test]
fn linear_partition_above_explicit_limit() {
    let n = 24;
    let slice: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let critical = [3u64, 77, 1 << 20, 0xabcdef];
    let spec = SasSpec::new(n, 1, 0x5a5a5a, &critical, slice, vec!["y".into()], 4).unwrap();
    let p = spec.partition.as_ref().unwrap();
    for (i, &x) in spec.blocks[0].iter().enumerate() {
        assert_eq!(p.set_of(0, x ^ 0x5a5a5a), i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 4];
    for _ in 0..40_000 {
        counts[p.set_of(0, rng.gen_range(0..1u64 << n))] += 1;
    }
    assert!(counts.iter().all(|&c| (9_000..11_000).contains(&c)), "{counts:?}");
}
