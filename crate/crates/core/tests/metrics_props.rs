use lockbench::locking::{
    bind_key, is_key_input, lock_rsas, lock_sas, lock_sfll_flex, Cube, Key, LockedCircuit, SasSpec, SfllSpec,
};
use lockbench::metrics::{
    average_error_rates, corrupted_set, error_sweep, ier_sampled, ker_sampled, sas_average_ier, Domain, Exact, KeySpace,
};
use lockbench::netlist::{gen, Circuit};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent brute force: per key index in `keys`, the minterms of the
/// original's full input space on which the locked circuit differs.
fn brute_corrupted(locked: &Circuit, orig: &Circuit, key: &Key) -> Vec<u64> {
    let w = orig.num_inputs();
    let mut out = Vec::new();
    for x in 0..1u64 << w {
        let data: Vec<bool> = (0..w).map(|i| (x >> (w - 1 - i)) & 1 == 1).collect();
        let mut key_pos = 0;
        let ins: Vec<bool> = locked
            .input_names()
            .iter()
            .map(|name| {
                if is_key_input(name) {
                    let idx: usize = name["keyinput".len()..].parse().unwrap();
                    key_pos += 1;
                    key.bits[idx]
                } else {
                    data[orig.input_position(name).unwrap()]
                }
            })
            .collect();
        assert_eq!(key_pos, key.len());
        if locked.eval_bits(&ins) != orig.eval_bits(&data) {
            out.push(x);
        }
    }
    out
}

/// `(Σ KER numerators, wrong keys, minterms)` by brute force.
fn brute_sums(locked: &LockedCircuit, orig: &Circuit) -> (u64, u64, u64) {
    let len = locked.key_len();
    let (mut total, mut wrong) = (0u64, 0u64);
    for k in 0..1u64 << len {
        let mut key = Key::zeros(len);
        key.set_field(0, len, k);
        let c = brute_corrupted(&locked.circuit, orig, &key).len() as u64;
        if c > 0 {
            wrong += 1;
            total += c;
        }
    }
    (total, wrong, 1 << orig.num_inputs())
}

fn n4_instances() -> Vec<(Circuit, LockedCircuit)> {
    let orig = gen::array_multiplier(2, 2);
    let sas = SasSpec::for_circuit(&orig, 4, 1, 9, &[2, 7], 1).unwrap();
    let sas2 = SasSpec::for_circuit(&orig, 4, 2, 3, &[1, 4, 8, 14], 2).unwrap();
    let anti = SasSpec::for_circuit(&orig, 4, 1, 5, &[], 0).unwrap();
    let sfll = SfllSpec::from_minterms(4, &[3, 12], orig.input_names().iter().map(|s| s.to_string()).collect(), "p0".into())
        .unwrap();
    vec![
        (orig.clone(), lock_sas(&orig, &sas, 1).unwrap()),
        (orig.clone(), lock_sas(&orig, &sas2, 1).unwrap()),
        (orig.clone(), lock_rsas(&orig, &sas, 1).unwrap()),
        (orig.clone(), lock_rsas(&orig, &sas2, 1).unwrap()),
        (orig.clone(), lock_sas(&orig, &anti, 1).unwrap()),
        (orig.clone(), lock_sfll_flex(&orig, &sfll, 1).unwrap()),
    ]
}

#[test]
fn average_ker_equals_average_ier_every_scheme() {
    for (orig, locked) in n4_instances() {
        let (total, wrong, minterms) = brute_sums(&locked, &orig);
        let want = Exact::new(total, wrong * minterms);
        let a = average_error_rates(&locked.circuit, &orig, &Domain::full(&orig), &KeySpace::full(locked.key_len()))
            .unwrap();
        assert_eq!(a.wrong_keys, wrong, "{}", locked.scheme);
        assert_eq!(a.e_w, want, "{}", locked.scheme);
        assert_eq!(a.gamma, want, "{}", locked.scheme);
    }
}

#[test]
fn antisat_average_ker_is_two_to_minus_n() {
    for n in [3usize, 4, 5, 6] {
        let orig = gen::array_multiplier(n.div_ceil(2), n / 2);
        let spec = SasSpec::for_circuit(&orig, n, 1, 1, &[], 0).unwrap();
        let locked = lock_sas(&orig, &spec, 4).unwrap();
        let a = average_error_rates(&locked.circuit, &orig, &Domain::full(&orig), &KeySpace::full(locked.key_len()))
            .unwrap();
        assert_eq!(a.e_w, Exact::new(1, 1 << n));
        assert_eq!(a.wrong_keys, (1 << (2 * n)) - (1 << n));
    }
}

fn pow2_upto(max: usize) -> impl Iterator<Item = usize> {
    (0..).map(|i| 1usize << i).take_while(move |&v| v <= max)
}

/// Measures each minterm's IER with the keys of its own block free (block 0
/// for non-critical minterms) and the other blocks at the correct key.
fn check_ier_law(orig: &Circuit, locked: &LockedCircuit, spec: &SasSpec) {
    let n = spec.n;
    let domain = Domain::full(orig);
    let per_block: Vec<_> = (0..spec.l)
        .map(|j| {
            let keys = KeySpace::restricted(locked.correct_key.clone(), 2 * n * j, 2 * n);
            error_sweep(&locked.circuit, orig, &domain, &keys).unwrap()
        })
        .collect();
    for x in 0..1u64 << n {
        let (j, want) = match spec.block_of(x) {
            Some((j, _)) => (j, Exact::new(spec.l as u64, spec.m as u64)),
            None => (0, Exact::new(1, 1 << n)),
        };
        assert_eq!(per_block[j].ier(x), Some(want), "{} n={n} m={} l={} x={x}", locked.scheme, spec.m, spec.l);
    }
}

#[test]
fn ier_law_all_power_of_two_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in [4usize, 5] {
        let orig = gen::array_multiplier(n.div_ceil(2), n / 2);
        for m in pow2_upto(1 << n) {
            for l in pow2_upto(m.min(orig.num_outputs())) {
                let mut pool: Vec<u64> = (0..1 << n).collect();
                for i in 0..m {
                    let j = rng.gen_range(i..pool.len());
                    pool.swap(i, j);
                }
                let x_g = rng.gen_range(0..1u64 << n);
                let spec = SasSpec::for_circuit(&orig, n, l, x_g, &pool[..m], rng.gen()).unwrap();
                check_ier_law(&orig, &lock_sas(&orig, &spec, 3).unwrap(), &spec);
                check_ier_law(&orig, &lock_rsas(&orig, &spec, 3).unwrap(), &spec);
            }
        }
    }
}

#[test]
fn single_block_full_space_matches_closed_form_average() {
    for (n, m) in [(4usize, 1usize), (4, 4), (5, 2), (5, 8)] {
        let orig = gen::array_multiplier(n.div_ceil(2), n / 2);
        let critical: Vec<u64> = (0..m as u64).map(|i| i * 3 + 1).collect();
        let spec = SasSpec::for_circuit(&orig, n, 1, 2, &critical, 6).unwrap();
        let locked = lock_sas(&orig, &spec, 1).unwrap();
        let a = average_error_rates(&locked.circuit, &orig, &Domain::full(&orig), &KeySpace::full(locked.key_len()))
            .unwrap();
        assert_eq!(a.gamma, sas_average_ier(n, m, 1), "n={n} m={m}");
    }
}

#[test]
fn sampled_intervals_cover_exact_values() {
    let orig = gen::array_multiplier(2, 2);
    let spec = SasSpec::for_circuit(&orig, 4, 1, 0, &[5, 10], 3).unwrap();
    let locked = lock_sas(&orig, &spec, 2).unwrap();
    let domain = Domain::full(&orig);
    let keys = KeySpace::full(locked.key_len());
    let counts = error_sweep(&locked.circuit, &orig, &domain, &keys).unwrap();
    let reps = 120u64;

    let exact_ier = counts.ier(5).unwrap().to_f64();
    let covered = (0..reps)
        .filter(|&s| ier_sampled(&locked.circuit, &orig, 5, &domain, &keys, 300, s).unwrap().covers(exact_ier))
        .count();
    assert!(covered as f64 >= 0.93 * reps as f64, "IER coverage {covered}/{reps}");

    let wide = SasSpec::for_circuit(&gen::array_multiplier(4, 4), 8, 1, 0, &[1, 2], 3).unwrap();
    let orig8 = gen::array_multiplier(4, 4);
    let locked8 = lock_sas(&orig8, &wide, 2).unwrap();
    let mut key = locked8.correct_key.clone();
    key.set_field(0, 8, 0x3c);
    let domain8 = Domain::full(&orig8);
    let exact_ker = corrupted_set(&locked8.circuit, &orig8, &key, &domain8).unwrap().len() as f64 / 256.0;
    assert!(exact_ker > 0.0);
    let covered = (0..reps)
        .filter(|&s| ker_sampled(&locked8.circuit, &orig8, &key, &domain8, 2000, s).unwrap().covers(exact_ker))
        .count();
    assert!(covered as f64 >= 0.93 * reps as f64, "KER coverage {covered}/{reps}");
}

fn cube_fraction_count(spec: &SfllSpec, set: &[u64]) -> (u64, u64) {
    let inside = set.iter().filter(|&&x| spec.protected(x)).count() as u64;
    (inside, set.len() as u64 - inside)
}

#[test]
fn sfll_disjoint_wrong_cubes_rates() {
    let orig = gen::array_multiplier(6, 6);
    let n = 12;
    let names: Vec<String> = orig.input_names().iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, c) in [(12usize, 1usize), (12, 4), (8, 2), (8, 4), (6, 3)] {
        let care = ((1u64 << k) - 1) << (n - k);
        let mut values: Vec<u64> = Vec::new();
        while values.len() < 2 * c {
            let v = (rng.gen_range(0..1u64 << n)) & care;
            if !values.contains(&v) {
                values.push(v);
            }
        }
        let cubes: Vec<Cube> = values[..c].iter().map(|&value| Cube { value, care }).collect();
        let spec = SfllSpec::new(n, cubes, names.clone(), "p5".into()).unwrap();
        let locked = lock_sfll_flex(&orig, &spec, 0).unwrap();
        let domain = Domain::full(&orig);
        let key = spec.key_for_cubes(&values[c..]);
        let set = corrupted_set(&locked.circuit, &orig, &key, &domain).unwrap();
        let (stripped, restored) = cube_fraction_count(&spec, &set);
        let unit = 1u64 << (n - k);
        assert_eq!(stripped, c as u64 * unit, "k={k} c={c}");
        let rate = set.len() as u64;
        assert!(c as u64 * unit <= rate && rate <= 2 * c as u64 * unit, "k={k} c={c} rate={rate}");
        assert_eq!(restored, c as u64 * unit);
        let bound = bind_key(&locked.circuit, &key).unwrap();
        assert_eq!(brute_corrupted(&bound, &orig, &Key::zeros(0)).len() as u64, rate);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn average_ker_equals_average_ier_on_random_sas(n in 3usize..=5, log_m in 0u32..=3, x_g in any::<u64>(), seed in any::<u64>(), rsas in any::<bool>()) {
        let m = (1usize << log_m).min(1 << n);
        let orig = gen::array_multiplier(n.div_ceil(2), n / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut critical: Vec<u64> = Vec::new();
        while critical.len() < m {
            let v = rng.gen_range(0..1u64 << n);
            if !critical.contains(&v) {
                critical.push(v);
            }
        }
        let spec = SasSpec::for_circuit(&orig, n, 1, x_g & ((1 << n) - 1), &critical, seed).unwrap();
        let locked = if rsas { lock_rsas(&orig, &spec, seed) } else { lock_sas(&orig, &spec, seed) }.unwrap();
        let (total, wrong, minterms) = brute_sums(&locked, &orig);
        let a = average_error_rates(&locked.circuit, &orig, &Domain::full(&orig), &KeySpace::full(locked.key_len())).unwrap();
        prop_assert_eq!(a.e_w, Exact::new(total, wrong * minterms));
        prop_assert_eq!(a.gamma, sas_average_ier(n, m, 1));
    }
}
