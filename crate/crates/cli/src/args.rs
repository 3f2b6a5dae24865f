use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lockbench", version, about = "Lock, attack and measure combinational netlists")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every randomized step; required by randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and simulations (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file: the locked BENCH for `lock`, the reduced BENCH for
    /// `attack removal`, a copy of the JSON report otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Sas,
    Rsas,
    Antisat,
    #[value(name = "sfll-flex")]
    SfllFlex,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lock a circuit; writes the locked BENCH, a key file and the resolved spec.
    Lock(LockArgs),
    /// Run an attack on a locked circuit.
    Attack {
        #[command(subcommand)]
        mode: AttackMode,
    },
    /// Error-rate metrics and closed-form expectations.
    Metrics {
        #[command(subcommand)]
        what: MetricsWhat,
    },
    /// Evaluate a circuit on given or random input patterns.
    Simulate(SimulateArgs),
    /// Workload-level impact of a key, from an operand trace.
    Impact(ImpactArgs),
}

#[derive(Debug, Args)]
pub struct LockArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    #[arg(long)]
    pub spec: PathBuf,
    /// Key file path (default: `<out>.key`).
    #[arg(long)]
    pub key_out: Option<PathBuf>,
}

/// Locked circuit plus the original (or activated) circuit used as oracle.
#[derive(Debug, Args)]
pub struct Pair {
    /// Locked BENCH.
    #[arg(long)]
    pub bench: PathBuf,
    /// Original BENCH (oracle).
    #[arg(long)]
    pub oracle: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AttackMode {
    /// Oracle-guided SAT attack until no distinguishing input remains.
    Sat {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        iter_limit: Option<u64>,
        /// Write every iteration's formula as DIMACS into this directory.
        #[arg(long)]
        dump_cnf: Option<PathBuf>,
        /// Rebuild the solver each iteration instead of solving incrementally.
        #[arg(long)]
        fresh: bool,
    },
    /// SAT attack stopped after a fixed number of iterations, with a sampled error estimate.
    Approx {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 10)]
        settle_window: u64,
        #[arg(long, default_value_t = 10_000)]
        sample: u64,
    },
    /// Signal-probability removal of point-function blocks.
    Removal {
        #[arg(long)]
        bench: PathBuf,
        /// Original BENCH; when given the report lists the minterms where the
        /// reduced circuit differs from it.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Spec whose input slice is the mismatch domain (default: all inputs).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Tie these wires to 0 instead of picking block outputs by skew. Repeatable.
        #[arg(long = "wire")]
        wires: Vec<String>,
    },
    /// Monte-Carlo model of the attack's iteration count.
    Model {
        /// Circuit the spec refers to (or the locked circuit with `--oracle`).
        #[arg(long)]
        bench: PathBuf,
        /// With an oracle, wrong-key families are measured from the two netlists.
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

/// Where minterms range: the spec's input slice (other inputs 0) or all inputs.
#[derive(Debug, Args)]
pub struct DomainArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Vary every primary input even when a spec is given.
    #[arg(long)]
    pub full_input: bool,
}

#[derive(Debug, Subcommand)]
pub enum MetricsWhat {
    /// Key error rate of one key.
    Ker {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        key: PathBuf,
        /// Estimate from this many random minterms instead of enumerating.
        #[arg(long)]
        sample: Option<u64>,
    },
    /// Input error rate of one minterm, or the whole table.
    Ier {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        domain: DomainArgs,
        /// Minterm in hex; omit for the full table.
        #[arg(long)]
        minterm: Option<String>,
        /// Estimate from this many random keys instead of enumerating.
        #[arg(long)]
        sample: Option<u64>,
        /// Vary only SAS block `J`'s key bits, the rest taken from `--key`.
        #[arg(long)]
        block: Option<usize>,
        #[arg(long)]
        key: Option<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Average KER over wrong keys and average IER over minterms.
    Averages {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        domain: DomainArgs,
    },
    /// Expected SAT-attack iterations of a SAS configuration.
    Expected {
        /// SAS spec file; `n`, `m` and `l` are read from it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, short = 'n')]
        n: Option<usize>,
        #[arg(long, short = 'm')]
        m: Option<usize>,
        #[arg(long, short = 'l')]
        l: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub bench: PathBuf,
    /// Key file; binds the key inputs before simulating.
    #[arg(long)]
    pub key: Option<PathBuf>,
    /// Input pattern in hex, first primary input most significant. Repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<String>,
    /// Number of random patterns (needs --seed).
    #[arg(long)]
    pub random: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ImpactArgs {
    #[command(flatten)]
    pub pair: Pair,
    #[command(flatten)]
    pub domain: DomainArgs,
    /// CSV of `minterm_hex,count` rows.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
}
