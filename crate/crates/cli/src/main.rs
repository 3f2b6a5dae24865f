//! `lockbench` command-line front end. Every command prints one JSON report
//! on stdout; diagnostics go to stderr. Exit codes: 0 success, 1 usage,
//! 2 unreadable or unparsable input, 3 invalid spec or infeasible request,
//! 4 internal failure.

mod args;
mod commands;
mod error;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use args::Cli;
use error::{CliError, EXIT_INTERNAL, EXIT_USAGE};

#[derive(Debug, Serialize)]
struct RunReport {
    command: Vec<String>,
    seed: Option<u64>,
    params: serde_json::Value,
    results: serde_json::Value,
    tool_version: &'static str,
    wall_time_ms: u128,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    }
    let start = Instant::now();
    let out = commands::dispatch(&cli)?;
    let report = RunReport {
        command: argv.into_iter().skip(1).collect(),
        seed: cli.seed,
        params: out.params,
        results: out.results,
        tool_version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: start.elapsed().as_millis(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError { code: EXIT_INTERNAL, message: e.to_string() })?;
    if out.report_to_out {
        if let Some(path) = &cli.out {
            std::fs::write(path, &text).map_err(|e| CliError::parse(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    // A closed pipe (e.g. `| head`) is not an error.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}
