use std::collections::BTreeSet;

use lockbench::attacks::{
    model_attack_sim, model_attack_trace, sat_attack, AttackConfig, ExplicitFamilies, ModelTarget, Oracle, Termination,
};
use lockbench::locking::{lock_antisat, lock_rsas, lock_sas, lock_sfll_flex, LockedCircuit, SasSpec, SfllSpec};
use lockbench::metrics::{sas_average_ier, tradeoff_check, wrong_key_families, Domain, Exact, KeySpace};
use lockbench::netlist::{check_equivalence, gen, Circuit, EquivMode};
use lockbench::sat::VarisatEngine;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn distinct(rng: &mut impl Rng, count: usize, n: usize) -> Vec<u64> {
    let mut out = BTreeSet::new();
    while out.len() < count {
        out.insert(rng.gen_range(0..1u64 << n));
    }
    out.into_iter().collect()
}

fn attack_and_verify(orig: &Circuit, locked: &LockedCircuit) -> lockbench::attacks::AttackResult {
    let oracle = Oracle::new(orig.clone());
    let r = sat_attack::<VarisatEngine>(&locked.circuit, &oracle, &AttackConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::Exhausted);
    let bound = locked.bind_key(&r.recovered_key).unwrap();
    let mode = if orig.num_inputs() <= 12 { EquivMode::exhaustive() } else { EquivMode::Sat };
    assert!(check_equivalence(orig, &bound, mode).unwrap().is_equal(), "{}", locked.scheme);
    let inputs: BTreeSet<&Vec<bool>> = r.di_log.iter().map(|d| &d.input).collect();
    assert_eq!(inputs.len(), r.di_log.len(), "repeated DI");
    r
}

fn slice_value(bits: &[bool], n: usize) -> u64 {
    bits[..n].iter().fold(0, |acc, &b| acc << 1 | b as u64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exhausted_attack_recovers_a_correct_key(seed in any::<u64>(), scheme in 0usize..4, n in 3usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (extra, gates) = (rng.gen_range(0..3), 25 + rng.gen_range(0..30));
        let orig = gen::random_circuit(&mut rng, n + extra, gates, 2);
        let locked = match scheme {
            0 | 1 => {
                let m = 1usize << rng.gen_range(0..3);
                let spec = SasSpec::for_circuit(&orig, n, 1, rng.gen_range(0..1 << n), &distinct(&mut rng, m, n), seed).unwrap();
                if scheme == 0 { lock_sas(&orig, &spec, seed) } else { lock_rsas(&orig, &spec, seed) }.unwrap()
            }
            2 => {
                let driver = lockbench::locking::default_insertion_wires(&orig, 1).unwrap().remove(0);
                lock_antisat(&orig, n, rng.gen_range(0..1 << n), &driver, seed).unwrap()
            }
            _ => {
                let slice = lockbench::locking::default_slice(&orig, n).unwrap();
                let wire = lockbench::locking::default_insertion_wires(&orig, 1).unwrap().remove(0);
                let spec = SfllSpec::from_minterms(n, &distinct(&mut rng, 2, n), slice, wire).unwrap();
                lock_sfll_flex(&orig, &spec, seed).unwrap()
            }
        };
        attack_and_verify(&orig, &locked);
    }
}

#[test]
fn every_critical_minterm_is_a_di_of_an_exhausted_sas_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (n, m, l) in [(4usize, 2usize, 1usize), (5, 4, 1), (6, 4, 2), (6, 8, 2), (4, 16, 1)] {
        let orig = gen::array_multiplier(n.div_ceil(2), n / 2);
        let critical = distinct(&mut rng, m, n);
        let spec = SasSpec::for_circuit(&orig, n, l, rng.gen_range(0..1 << n), &critical, rng.gen()).unwrap();
        for locked in [lock_sas(&orig, &spec, 1).unwrap(), lock_rsas(&orig, &spec, 1).unwrap()] {
            let r = attack_and_verify(&orig, &locked);
            let dis: BTreeSet<u64> = r.di_log.iter().map(|d| slice_value(&d.input, n)).collect();
            for x in &critical {
                assert!(dis.contains(x), "{} n={n} m={m} l={l}: {x} not a DI", locked.scheme);
            }
        }
        for trial in 0..20 {
            let trace: BTreeSet<u64> = model_attack_trace(ModelTarget::Sas(&spec), 5, trial).unwrap().into_iter().collect();
            assert!(critical.iter().all(|x| trace.contains(x)), "model trace misses a critical minterm");
        }
    }
}

fn union_covers(acc: &[u64], family: &[u64]) -> bool {
    family.iter().zip(acc).all(|(f, a)| f & !a == 0)
}

#[test]
fn no_model_di_is_already_covered() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let orig = gen::array_multiplier(2, 2);
    let mut cases: Vec<(Circuit, LockedCircuit)> = Vec::new();
    for _ in 0..4 {
        let spec = SasSpec::for_circuit(&orig, 4, 1, rng.gen_range(0..16), &distinct(&mut rng, 2, 4), rng.gen()).unwrap();
        cases.push((orig.clone(), lock_sas(&orig, &spec, 0).unwrap()));
        let sfll = SfllSpec::from_minterms(
            4,
            &distinct(&mut rng, 2, 4),
            lockbench::locking::default_slice(&orig, 4).unwrap(),
            "p1".into(),
        )
        .unwrap();
        cases.push((orig.clone(), lock_sfll_flex(&orig, &sfll, 0).unwrap()));
    }
    for (orig, locked) in &cases {
        let fam = wrong_key_families(&locked.circuit, orig, &Domain::full(orig), &KeySpace::full(locked.key_len())).unwrap();
        for trial in 0..50 {
            let trace = model_attack_trace(ModelTarget::Explicit(&fam), 11, trial).unwrap();
            let mut acc = vec![0u64; fam.families[0].len()];
            for &x in &trace {
                let f = &fam.families[x as usize];
                assert!(!union_covers(&acc, f), "{}: DI {x} adds no wrong key", locked.scheme);
                acc.iter_mut().zip(f).for_each(|(a, b)| *a |= b);
            }
            let covered: u64 = acc.iter().map(|w| w.count_ones() as u64).sum();
            assert_eq!(covered, fam.num_keys as u64, "trace ends before every wrong key is covered");
        }
    }
}

fn explicit_gamma(f: &ExplicitFamilies) -> Exact {
    let total: u64 = f.families.iter().flatten().map(|w| w.count_ones() as u64).sum();
    Exact::new(total, f.num_keys as u64 * f.families.len() as u64)
}

#[test]
fn mean_iterations_meet_inverse_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (n, m, l) in [(6usize, 2usize, 1usize), (6, 8, 2), (8, 4, 4), (8, 16, 1), (10, 2, 2)] {
        let slice: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let spec = SasSpec::new(n, l, 0, &distinct(&mut rng, m, n), slice, vec!["y".into(); l], 1).unwrap();
        let stats = model_attack_sim(ModelTarget::Sas(&spec), 2000, 4).unwrap();
        assert!(tradeoff_check(&sas_average_ier(n, m, l), stats.mean).unwrap(), "n={n} m={m} l={l} mean={}", stats.mean);
    }
    let orig = gen::array_multiplier(2, 2);
    for _ in 0..4 {
        let sfll = SfllSpec::from_minterms(
            4,
            &distinct(&mut rng, 2, 4),
            lockbench::locking::default_slice(&orig, 4).unwrap(),
            "p0".into(),
        )
        .unwrap();
        let locked = lock_sfll_flex(&orig, &sfll, 0).unwrap();
        let fam = wrong_key_families(&locked.circuit, &orig, &Domain::full(&orig), &KeySpace::full(locked.key_len())).unwrap();
        let stats = model_attack_sim(ModelTarget::Explicit(&fam), 2000, 4).unwrap();
        assert!(tradeoff_check(&explicit_gamma(&fam), stats.mean).unwrap());
    }
}
