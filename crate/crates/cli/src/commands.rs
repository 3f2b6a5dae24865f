use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use lockbench::attacks::{
    approximate_sat_attack, model_attack_sim, removal_attack, sat_attack, ApproxConfig, AttackConfig, AttackLimits,
    EngineMode, IterationStats, ModelTarget, Oracle, RemovalTarget, Termination,
};
use lockbench::locking::{
    bind_key, default_slice, key_inputs, lock_rsas, lock_sas, lock_sfll_flex, parse_hex, rng_for, to_hex, Key, LockSpec,
    SpecFile,
};
use lockbench::metrics::{
    averages_from_counts, corrupted_set, error_sweep, expected_iterations_for, ier_sampled, ker, ker_sampled,
    sas_average_ier, tradeoff_check, wrong_key_families, Domain, ErrorProfile, ErrorRow, Exact, KeySpace, Method, Table,
    Value as ProfileValue,
};
use lockbench::netlist::{check_equivalence, emit_bench, parse_bench_named, Circuit, EquivMode};
use lockbench::sat::VarisatEngine;
use lockbench::workload::{impact_report, load_trace};

use crate::args::{AttackMode, Cli, Command, DomainArgs, MetricsWhat, Pair, SchemeArg};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub struct Output {
    pub params: Value,
    pub results: Value,
    /// Whether `--out` receives a copy of the report (otherwise the command
    /// wrote its own artifact there).
    pub report_to_out: bool,
}

fn report(params: Value, results: Value) -> Output {
    Output { params, results, report_to_out: true }
}

fn to_value<T: Serialize>(t: &T) -> Result<Value> {
    serde_json::to_value(t).map_err(|e| CliError::internal(e.to_string()))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::parse(format!("cannot write {}: {e}", path.display())))
}

fn read_bench(path: &Path) -> Result<Circuit> {
    let text = read_text(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("circuit");
    parse_bench_named(&text, name).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn read_spec(path: &Path) -> Result<SpecFile> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::spec(format!("{}: not a SAS or SFLL-flex spec: {e}", path.display())))
}

fn read_key(path: &Path, len: usize) -> Result<Key> {
    let text = read_text(path)?;
    Key::from_hex(&text, len).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn need_seed(cli: &Cli) -> Result<u64> {
    cli.seed.ok_or_else(|| CliError::usage("this command is randomized and needs --seed"))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// The spec's input slice over `original`, or every input.
fn domain_for(args: &DomainArgs, original: &Circuit) -> Result<Domain> {
    let spec = match (&args.spec, args.full_input) {
        (Some(p), false) => read_spec(p)?,
        _ => return Ok(Domain::full(original)),
    };
    let (n, slice) = match &spec {
        SpecFile::Sas(f) => (f.n, f.input_slice.clone()),
        SpecFile::Sfll(f) => (f.n, f.input_slice.clone()),
    };
    Ok(Domain::new(match slice {
        Some(s) => s,
        None => default_slice(original, n)?,
    }))
}

fn domain_params(d: &Domain) -> Value {
    json!({ "domain": d.inputs, "width": d.width() })
}

pub fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Lock(a) => lock(cli, a),
        Command::Attack { mode } => attack(cli, mode),
        Command::Metrics { what } => metrics(cli, what),
        Command::Simulate(a) => simulate(cli, a),
        Command::Impact(a) => impact(a),
    }
}

fn lock(cli: &Cli, a: &crate::args::LockArgs) -> Result<Output> {
    let seed = need_seed(cli)?;
    let out = cli.out.clone().ok_or_else(|| CliError::usage("lock needs --out for the locked BENCH"))?;
    let c = read_bench(&a.bench)?;
    let locked = match (a.scheme, read_spec(&a.spec)?) {
        (SchemeArg::SfllFlex, SpecFile::Sfll(f)) => lock_sfll_flex(&c, &f.resolve(&c)?, seed)?,
        (SchemeArg::SfllFlex, SpecFile::Sas(_)) => return Err(CliError::spec("sfll-flex needs a spec with cubes")),
        (_, SpecFile::Sfll(_)) => return Err(CliError::spec("cube spec given for a SAS-family scheme")),
        (scheme, SpecFile::Sas(f)) => {
            let spec = f.resolve(&c, seed)?;
            match scheme {
                SchemeArg::Antisat if !spec.is_antisat() => {
                    return Err(CliError::spec("antisat takes no critical minterms"))
                }
                SchemeArg::Sas if spec.is_antisat() => {
                    return Err(CliError::spec("sas needs critical minterms (use --scheme antisat for none)"))
                }
                SchemeArg::Rsas => lock_rsas(&c, &spec, seed)?,
                _ => lock_sas(&c, &spec, seed)?,
            }
        }
    };
    let key_out = a.key_out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.key", out.display())));
    let spec_out = PathBuf::from(format!("{}.spec.json", out.display()));
    let spec_file = SpecFile::from_spec(&locked.spec);
    write_text(&out, &emit_bench(&locked.circuit))?;
    write_text(&key_out, &format!("{}\n", locked.correct_key.to_hex()))?;
    write_text(&spec_out, &serde_json::to_string_pretty(&spec_file).map_err(|e| CliError::internal(e.to_string()))?)?;
    let (m, l, c_cubes) = match &locked.spec {
        LockSpec::Sas(s) => (Some(s.m), Some(s.l), None),
        LockSpec::Sfll(s) => (None, None, Some(s.c)),
    };
    let results = json!({
        "scheme": locked.scheme,
        "n": locked.spec.n(),
        "m": m,
        "l": l,
        "c": c_cubes,
        "key_len": locked.key_len(),
        "gates": locked.circuit.gate_count(),
        "locked_bench": path_str(&out),
        "key_file": path_str(&key_out),
        "spec_file": path_str(&spec_out),
        "spec": to_value(&spec_file)?,
    });
    let params = json!({ "bench": path_str(&a.bench), "spec": path_str(&a.spec), "scheme": locked.scheme });
    Ok(Output { params, results, report_to_out: false })
}

fn load_pair(p: &Pair) -> Result<(Circuit, Circuit)> {
    Ok((read_bench(&p.bench)?, read_bench(&p.oracle)?))
}

fn pair_params(p: &Pair) -> Value {
    json!({ "bench": path_str(&p.bench), "oracle": path_str(&p.oracle) })
}

/// Whether the locked circuit with `key` matches `original` on every input.
fn functionally_correct(locked: &Circuit, original: &Circuit, key: &Key) -> Result<bool> {
    let bound = bind_key(locked, key)?;
    Ok(check_equivalence(&bound, original, EquivMode::auto(original.num_inputs()))?.is_equal())
}

fn attack(cli: &Cli, mode: &AttackMode) -> Result<Output> {
    match mode {
        AttackMode::Sat { pair, iter_limit, dump_cnf, fresh } => {
            let (locked, original) = load_pair(pair)?;
            let oracle = Oracle::new(original.clone());
            let config = AttackConfig {
                limits: AttackLimits { max_iterations: iter_limit.unwrap_or(AttackLimits::default().max_iterations), time_limit: None },
                mode: if *fresh { EngineMode::Fresh } else { EngineMode::Incremental },
                dump_cnf: dump_cnf.clone(),
                verify_models: true,
            };
            let res = sat_attack::<VarisatEngine>(&locked, &oracle, &config)?;
            let correct = functionally_correct(&locked, &original, &res.recovered_key)?;
            if res.termination == Termination::Exhausted && !correct {
                return Err(CliError::internal("attack exhausted all DIs but the recovered key is wrong"));
            }
            let mut results = to_value(&res)?;
            results["functionally_correct"] = json!(correct);
            results["queries"] = json!(oracle.queries());
            let mut params = pair_params(pair);
            params["iter_limit"] = json!(iter_limit);
            params["engine"] = to_value(&config.mode)?;
            params["dump_cnf"] = json!(dump_cnf.as_deref().map(path_str));
            Ok(report(params, results))
        }
        AttackMode::Approx { pair, settle_window, sample } => {
            let seed = need_seed(cli)?;
            let (locked, original) = load_pair(pair)?;
            let oracle = Oracle::new(original.clone());
            let config = ApproxConfig {
                settle_window: *settle_window,
                sample_count: *sample,
                seed,
                mode: EngineMode::Incremental,
                time_limit: None,
            };
            let res = approximate_sat_attack::<VarisatEngine>(&locked, &oracle, &config)?;
            let mut results = to_value(&res)?;
            results["functionally_correct"] = json!(functionally_correct(&locked, &original, &res.attack.recovered_key)?);
            let mut params = pair_params(pair);
            params["settle_window"] = json!(settle_window);
            params["sample"] = json!(sample);
            Ok(report(params, results))
        }
        AttackMode::Removal { bench, oracle, spec, wires } => {
            let locked = read_bench(bench)?;
            let target = if wires.is_empty() { RemovalTarget::Auto } else { RemovalTarget::Wires(wires.clone()) };
            let res = removal_attack(&locked, &target)?;
            let mut results = to_value(&res)?;
            results["gates"] = json!(res.circuit.gate_count());
            let mut report_to_out = true;
            if let Some(out) = &cli.out {
                write_text(out, &emit_bench(&res.circuit))?;
                results["reduced_bench"] = json!(path_str(out));
                report_to_out = false;
            }
            if let Some(o) = oracle {
                let original = read_bench(o)?;
                let domain = domain_for(&DomainArgs { spec: spec.clone(), full_input: false }, &original)?;
                if res.remaining_key_inputs == 0 {
                    let mismatch = corrupted_set(&res.circuit, &original, &Key::zeros(0), &domain)?;
                    results["equivalent_to_oracle"] = json!(mismatch.is_empty());
                    results["mismatch_minterms"] =
                        json!(mismatch.iter().map(|&x| to_hex(x, domain.width())).collect::<Vec<_>>());
                } else {
                    results["equivalent_to_oracle"] = Value::Null;
                    results["mismatch_minterms"] = Value::Null;
                }
                results["mismatch_domain"] = json!(domain.inputs);
            }
            let params = json!({
                "bench": path_str(bench),
                "oracle": oracle.as_deref().map(path_str),
                "spec": spec.as_deref().map(path_str),
                "wires": wires,
            });
            Ok(Output { params, results, report_to_out })
        }
        AttackMode::Model { bench, oracle, scheme, spec, trials } => model(cli, bench, oracle.as_deref(), *scheme, spec.as_deref(), *trials),
    }
}

fn model(
    cli: &Cli,
    bench: &Path,
    oracle: Option<&Path>,
    scheme: Option<SchemeArg>,
    spec: Option<&Path>,
    trials: u64,
) -> Result<Output> {
    let seed = need_seed(cli)?;
    let params = json!({
        "bench": path_str(bench),
        "oracle": oracle.map(path_str),
        "spec": spec.map(path_str),
        "trials": trials,
    });
    let bound = |gamma: &Option<Exact>, stats: &IterationStats| -> Result<Value> {
        Ok(match gamma {
            Some(g) => json!({
                "gamma": g,
                "inverse_gamma": 1.0 / g.to_f64(),
                "mean_at_least_inverse_gamma": tradeoff_check(g, stats.mean)?,
            }),
            None => Value::Null,
        })
    };
    if let Some(o) = oracle {
        let locked = read_bench(bench)?;
        let original = read_bench(o)?;
        let domain = domain_for(&DomainArgs { spec: spec.map(Path::to_path_buf), full_input: false }, &original)?;
        let keys = KeySpace::full(key_inputs(&locked).len());
        let fam = wrong_key_families(&locked, &original, &domain, &keys)?;
        let stats = model_attack_sim(ModelTarget::Explicit(&fam), trials, seed)?;
        let counts = error_sweep(&locked, &original, &domain, &keys)?;
        let gamma = counts.average_ier();
        let results = json!({
            "target": "explicit",
            "wrong_keys": fam.num_keys,
            "stats": to_value(&stats)?,
            "bound": bound(&gamma, &stats)?,
        });
        return Ok(report(params, results));
    }
    let spec_path = spec.ok_or_else(|| CliError::usage("model needs --spec (with --scheme) or --oracle"))?;
    let scheme = scheme.ok_or_else(|| CliError::usage("model with --spec needs --scheme"))?;
    let target_circuit = read_bench(bench)?;
    let (stats, expected, gamma) = match (scheme, read_spec(spec_path)?) {
        (SchemeArg::SfllFlex, SpecFile::Sfll(f)) => {
            let s = f.resolve(&target_circuit)?;
            (model_attack_sim(ModelTarget::Sfll(&s), trials, seed)?, None, None)
        }
        (SchemeArg::SfllFlex, _) | (_, SpecFile::Sfll(_)) => {
            return Err(CliError::spec("spec kind does not match --scheme"))
        }
        (_, SpecFile::Sas(f)) => {
            let s = f.resolve(&target_circuit, seed)?;
            let stats = model_attack_sim(ModelTarget::Sas(&s), trials, seed)?;
            if s.m == 0 {
                (stats, None, Some(Exact::new(1, 1 << s.n)))
            } else {
                (stats, Some(expected_iterations_for(s.n, s.m, s.l)), Some(sas_average_ier(s.n, s.m, s.l)))
            }
        }
    };
    let formula = match &expected {
        Some(e) => json!({
            "expected": e,
            "expected_f64": e.to_f64(),
            "within_3_std_errors": (stats.mean - e.to_f64()).abs() <= 3.0 * stats.std_error,
        }),
        None => Value::Null,
    };
    let results = json!({
        "target": "spec",
        "stats": to_value(&stats)?,
        "formula": formula,
        "bound": bound(&gamma, &stats)?,
    });
    Ok(report(params, results))
}

fn single_row(table: Table, method: Method, domain: &Domain, free: usize, at: String, value: ProfileValue) -> ErrorProfile {
    ErrorProfile {
        table,
        method,
        domain: domain.inputs.clone(),
        free_key_bits: free,
        wrong_keys: None,
        rows: vec![ErrorRow { at, value }],
    }
}

fn parse_minterm(s: &str, width: usize) -> Result<u64> {
    parse_hex(s, width).map_err(|e| CliError::usage(format!("--minterm: {e}")))
}

fn metrics(cli: &Cli, what: &MetricsWhat) -> Result<Output> {
    match what {
        MetricsWhat::Ker { pair, domain, key, sample } => {
            let (locked, original) = load_pair(pair)?;
            let d = domain_for(domain, &original)?;
            let k = read_key(key, key_inputs(&locked).len())?;
            let profile = match sample {
                Some(n) => {
                    let seed = need_seed(cli)?;
                    let e = ker_sampled(&locked, &original, &k, &d, *n, seed)?;
                    single_row(Table::Ker, Method::Sampled { samples: *n, seed }, &d, 0, k.to_hex(), ProfileValue::Estimate(e))
                }
                None => {
                    let v = ker(&locked, &original, &k, &d)?;
                    single_row(Table::Ker, Method::Exhaustive, &d, 0, k.to_hex(), ProfileValue::Exact(v))
                }
            };
            let mut params = pair_params(pair);
            params["domain"] = domain_params(&d);
            params["key"] = json!(path_str(key));
            Ok(report(params, to_value(&profile)?))
        }
        MetricsWhat::Ier { pair, domain, minterm, sample, block, key, csv } => {
            let (locked, original) = load_pair(pair)?;
            let d = domain_for(domain, &original)?;
            let q = key_inputs(&locked).len();
            let keys = match block {
                None => KeySpace::full(q),
                Some(j) => {
                    let spec = domain.spec.as_deref().ok_or_else(|| CliError::usage("--block needs --spec"))?;
                    let f = match read_spec(spec)? {
                        SpecFile::Sas(f) => f,
                        SpecFile::Sfll(_) => return Err(CliError::spec("--block applies to SAS-family specs")),
                    };
                    if *j >= f.l {
                        return Err(CliError::spec(format!("block {j} out of range (l = {})", f.l)));
                    }
                    let key = key.as_deref().ok_or_else(|| CliError::usage("--block needs --key for the fixed bits"))?;
                    let base = read_key(key, q)?;
                    if 2 * f.n * f.l != q {
                        return Err(CliError::spec("spec does not match the locked circuit's key length"));
                    }
                    KeySpace::restricted(base, 2 * f.n * j, 2 * f.n)
                }
            };
            let x = minterm.as_deref().map(|s| parse_minterm(s, d.width())).transpose()?;
            let mut params = pair_params(pair);
            params["domain"] = domain_params(&d);
            params["free_key_bits"] = json!(keys.free.len());
            params["block"] = json!(block);
            let profile = match sample {
                Some(n) => {
                    let seed = need_seed(cli)?;
                    let x = x.ok_or_else(|| CliError::usage("--sample needs --minterm"))?;
                    let e = ier_sampled(&locked, &original, x, &d, &keys, *n, seed)?;
                    let method = Method::Sampled { samples: *n, seed };
                    single_row(Table::Ier, method, &d, keys.free.len(), to_hex(x, d.width()), ProfileValue::Estimate(e))
                }
                None => {
                    let counts = error_sweep(&locked, &original, &d, &keys)?;
                    let mut p = counts.ier_profile(&d);
                    if let Some(path) = csv {
                        write_text(path, &p.to_csv())?;
                    }
                    if let Some(x) = x {
                        p.rows.retain(|r| r.at == to_hex(x, d.width()));
                    }
                    p
                }
            };
            Ok(report(params, to_value(&profile)?))
        }
        MetricsWhat::Averages { pair, domain } => {
            let (locked, original) = load_pair(pair)?;
            let d = domain_for(domain, &original)?;
            let keys = KeySpace::full(key_inputs(&locked).len());
            let counts = error_sweep(&locked, &original, &d, &keys)?;
            let av = averages_from_counts(&counts)?;
            let mut params = pair_params(pair);
            params["domain"] = domain_params(&d);
            Ok(report(params, to_value(&av)?))
        }
        MetricsWhat::Expected { spec, n, m, l } => {
            let (n, m, l) = match spec {
                Some(p) => match read_spec(p)? {
                    SpecFile::Sas(f) => (f.n, f.critical_minterms.len(), f.l),
                    SpecFile::Sfll(_) => return Err(CliError::spec("expected applies to SAS-family specs")),
                },
                None => match (n, m, l) {
                    (Some(n), Some(m), Some(l)) => (*n, *m, *l),
                    _ => return Err(CliError::usage("expected needs --spec or all of --n, --m, --l")),
                },
            };
            if m == 0 || l == 0 || n == 0 || n > 64 {
                return Err(CliError::spec("expected needs n in 1..=64 and positive m and l"));
            }
            let e = expected_iterations_for(n, m, l);
            let params = json!({ "spec": spec.as_deref().map(path_str), "n": n, "m": m, "l": l });
            Ok(report(params, json!({ "n": n, "m": m, "l": l, "expected": e, "expected_f64": e.to_f64() })))
        }
    }
}

fn simulate(cli: &Cli, a: &crate::args::SimulateArgs) -> Result<Output> {
    let mut c = read_bench(&a.bench)?;
    if let Some(k) = &a.key {
        let key = read_key(k, key_inputs(&c).len())?;
        c = bind_key(&c, &key)?;
    }
    let width = c.num_inputs();
    let mut patterns: Vec<Key> = a
        .inputs
        .iter()
        .map(|s| Key::from_hex(s, width).map_err(|e| CliError::usage(format!("--input {s}: {e}"))))
        .collect::<Result<_>>()?;
    if let Some(r) = a.random {
        let mut rng = rng_for(need_seed(cli)?, 0x73696d);
        patterns.extend((0..r).map(|_| Key::random(&mut rng, width)));
    }
    if patterns.is_empty() {
        return Err(CliError::usage("simulate needs --input or --random"));
    }
    let rows: Vec<Value> = patterns
        .iter()
        .map(|p| {
            let out = Key { bits: c.eval_bits(&p.bits) };
            json!({ "input": p.to_hex(), "output": out.to_hex() })
        })
        .collect();
    let results = json!({ "inputs": c.input_names(), "outputs": c.output_names(), "rows": rows });
    let params = json!({ "bench": path_str(&a.bench), "key": a.key.as_deref().map(path_str), "random": a.random });
    Ok(report(params, results))
}

fn impact(a: &crate::args::ImpactArgs) -> Result<Output> {
    let (locked, original) = load_pair(&a.pair)?;
    let d = domain_for(&a.domain, &original)?;
    let key = read_key(&a.key, key_inputs(&locked).len())?;
    let trace = load_trace(&a.trace)?;
    let corrupted = corrupted_set(&locked, &original, &key, &d)?;
    let r = impact_report(&trace, &key, &corrupted, d.width())?;
    let mut params = pair_params(&a.pair);
    params["domain"] = domain_params(&d);
    params["trace"] = json!(path_str(&a.trace));
    params["trace_total"] = json!(trace.total);
    Ok(report(params, to_value(&r)?))
}
