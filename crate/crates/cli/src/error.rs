use std::fmt;

use lockbench::attacks::{AttackError, ModelError};
use lockbench::locking::LockError;
use lockbench::metrics::MetricsError;
use lockbench::netlist::NetlistError;
use lockbench::workload::WorkloadError;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_SPEC: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: m.into() }
    }
    pub fn parse(m: impl Into<String>) -> Self {
        CliError { code: EXIT_PARSE, message: m.into() }
    }
    pub fn spec(m: impl Into<String>) -> Self {
        CliError { code: EXIT_SPEC, message: m.into() }
    }
    pub fn internal(m: impl Into<String>) -> Self {
        CliError { code: EXIT_INTERNAL, message: m.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<NetlistError> for CliError {
    fn from(e: NetlistError) -> Self {
        let code = match e {
            NetlistError::Syntax { .. }
            | NetlistError::Unsupported { .. }
            | NetlistError::UndefinedWire { .. }
            | NetlistError::DuplicateDefinition { .. }
            | NetlistError::ReservedName(_)
            | NetlistError::BadArity { .. }
            | NetlistError::Cycle(_) => EXIT_PARSE,
            NetlistError::Engine(_) => EXIT_INTERNAL,
            _ => EXIT_SPEC,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<LockError> for CliError {
    fn from(e: LockError) -> Self {
        match e {
            LockError::Netlist(n) => n.into(),
            other => CliError::spec(other.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::NoKeyInputs | AttackError::InterfaceMismatch(_) => CliError::spec(e.to_string()),
            AttackError::Io(_) => CliError::parse(e.to_string()),
            AttackError::Netlist(n) => n.into(),
            AttackError::Lock(l) => l.into(),
            AttackError::Engine(_) | AttackError::Inconsistent(_) => CliError::internal(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Lock(l) => l.into(),
            MetricsError::Netlist(n) => n.into(),
            other => CliError::spec(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::spec(e.to_string())
    }
}

impl From<WorkloadError> for CliError {
    fn from(e: WorkloadError) -> Self {
        match e {
            WorkloadError::Io { .. } | WorkloadError::Malformed { .. } | WorkloadError::ZeroTotal => {
                CliError::parse(e.to_string())
            }
            WorkloadError::Width(_) | WorkloadError::Selection { .. } => CliError::spec(e.to_string()),
        }
    }
}
