//! JSON form of locking specs. Minterms, `x_g`, cube values, and explicit
//! partition entries are fixed-width hex strings (`ceil(n/4)` digits).

use serde::{Deserialize, Serialize};

use super::partition::Partition;
use super::sas::SasSpec;
use super::sfll::{Cube, SfllSpec};
use super::{default_insertion_wires, default_slice, invalid, LockError, LockSpec};
use crate::netlist::Circuit;

pub fn to_hex(value: u64, n: usize) -> String {
    format!("{value:0width$x}", width = n.div_ceil(4).max(1))
}

pub fn parse_hex(s: &str, n: usize) -> Result<u64, LockError> {
    let t = s.trim();
    let t = t.strip_prefix("0x").unwrap_or(t);
    let v = u64::from_str_radix(t, 16).map_err(|e| invalid(format!("`{s}`: {e}")))?;
    if n < 64 && v >> n != 0 {
        return Err(invalid(format!("`{s}` exceeds {n} bits")));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionFile {
    /// Per block, per critical minterm, the `K1` values of its set.
    Explicit { sets: Vec<Vec<Vec<String>>> },
    /// Per block, the parity rows (hex) and the code of each minterm.
    Linear { rows: Vec<Vec<String>>, codes: Vec<Vec<u64>> },
}

/// SAS / RSAS / Anti-SAT spec document. Omitted `input_slice` and
/// `insertion_wires` take the target's first `n` inputs and first `l`
/// outputs; an omitted partition is generated from the seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SasSpecFile {
    pub n: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "one")]
    pub l: usize,
    #[serde(default)]
    pub x_g: Option<String>,
    #[serde(default)]
    pub critical_minterms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionFile>,
    #[serde(default)]
    pub insertion_wires: Option<Vec<String>>,
    #[serde(default)]
    pub input_slice: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<String>,
}

fn one() -> usize {
    1
}

impl SasSpecFile {
    pub fn from_spec(s: &SasSpec) -> SasSpecFile {
        let n = s.n;
        let partition = s.partition.as_ref().map(|p| match p {
            Partition::Explicit { sets, .. } => PartitionFile::Explicit {
                sets: sets
                    .iter()
                    .map(|b| b.iter().map(|set| set.iter().map(|&k| to_hex(k, n)).collect()).collect())
                    .collect(),
            },
            Partition::Linear { rows, codes } => PartitionFile::Linear {
                rows: rows.iter().map(|r| r.iter().map(|&v| to_hex(v, n)).collect()).collect(),
                codes: codes.clone(),
            },
        });
        SasSpecFile {
            n,
            m: Some(s.m),
            l: s.l,
            x_g: Some(to_hex(s.x_g, n)),
            critical_minterms: s.critical_minterms.iter().map(|&x| to_hex(x, n)).collect(),
            partition,
            insertion_wires: Some(s.insertion_wires.clone()),
            input_slice: Some(s.input_slice.clone()),
            polarity: Some(to_hex(s.polarity, n)),
        }
    }

    /// Completes defaults against `target` and validates.
    pub fn resolve(&self, target: &Circuit, partition_seed: u64) -> Result<SasSpec, LockError> {
        let n = self.n;
        if !(1..=32).contains(&n) {
            return Err(invalid(format!("n = {n} outside 1..=32")));
        }
        let minterms: Vec<u64> = self.critical_minterms.iter().map(|s| parse_hex(s, n)).collect::<Result<_, _>>()?;
        if let Some(m) = self.m {
            if m != minterms.len() {
                return Err(invalid(format!("m = {m} but {} critical minterms listed", minterms.len())));
            }
        }
        let x_g = self.x_g.as_deref().map(|s| parse_hex(s, n)).transpose()?.unwrap_or(0);
        let slice = match &self.input_slice {
            Some(s) => s.clone(),
            None => default_slice(target, n)?,
        };
        let wires = match &self.insertion_wires {
            Some(w) => w.clone(),
            None => default_insertion_wires(target, self.l)?,
        };
        if let Some(p) = &self.polarity {
            if parse_hex(p, n)? != 0 {
                return Err(invalid("only all-XOR polarity is supported"));
            }
        }
        if minterms.is_empty() {
            if self.l != 1 || wires.len() != 1 {
                return Err(invalid("Anti-SAT uses a single block"));
            }
            return SasSpec::antisat(n, x_g, slice, wires[0].clone());
        }
        let mut spec = SasSpec::new(n, self.l, x_g, &minterms, slice, wires, partition_seed)?;
        if let Some(pf) = &self.partition {
            spec.partition = Some(match pf {
                PartitionFile::Explicit { sets } => {
                    let sets = sets
                        .iter()
                        .map(|b| b.iter().map(|set| set.iter().map(|k| parse_hex(k, n)).collect()).collect())
                        .collect::<Result<Vec<Vec<Vec<u64>>>, _>>()?;
                    Partition::from_sets(n, sets)?
                }
                PartitionFile::Linear { rows, codes } => Partition::Linear {
                    rows: rows
                        .iter()
                        .map(|r| r.iter().map(|v| parse_hex(v, n)).collect())
                        .collect::<Result<_, _>>()?,
                    codes: codes.clone(),
                },
            });
            spec.validate()?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeFile {
    pub value: String,
    pub care: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfllSpecFile {
    pub n: usize,
    #[serde(default)]
    pub c: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    pub cubes: Vec<CubeFile>,
    #[serde(default)]
    pub insertion_wire: Option<String>,
    #[serde(default)]
    pub input_slice: Option<Vec<String>>,
}

impl SfllSpecFile {
    pub fn from_spec(s: &SfllSpec) -> SfllSpecFile {
        SfllSpecFile {
            n: s.n,
            c: Some(s.c),
            k: Some(s.k),
            cubes: s.cubes.iter().map(|c| CubeFile { value: to_hex(c.value, s.n), care: to_hex(c.care, s.n) }).collect(),
            insertion_wire: Some(s.insertion_wire.clone()),
            input_slice: Some(s.input_slice.clone()),
        }
    }

    pub fn resolve(&self, target: &Circuit) -> Result<SfllSpec, LockError> {
        let n = self.n;
        if !(1..=32).contains(&n) {
            return Err(invalid(format!("n = {n} outside 1..=32")));
        }
        let cubes: Vec<Cube> = self
            .cubes
            .iter()
            .map(|c| Ok(Cube { value: parse_hex(&c.value, n)?, care: parse_hex(&c.care, n)? }))
            .collect::<Result<_, LockError>>()?;
        let slice = match &self.input_slice {
            Some(s) => s.clone(),
            None => default_slice(target, n)?,
        };
        let wire = match &self.insertion_wire {
            Some(w) => w.clone(),
            None => default_insertion_wires(target, 1)?.remove(0),
        };
        let spec = SfllSpec::new(n, cubes, slice, wire)?;
        if self.c.is_some_and(|c| c != spec.c) || self.k.is_some_and(|k| k != spec.k) {
            return Err(invalid("declared c/k disagree with the cubes"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecFile {
    Sas(SasSpecFile),
    Sfll(SfllSpecFile),
}

impl SpecFile {
    pub fn from_spec(s: &LockSpec) -> SpecFile {
        match s {
            LockSpec::Sas(s) => SpecFile::Sas(SasSpecFile::from_spec(s)),
            LockSpec::Sfll(s) => SpecFile::Sfll(SfllSpecFile::from_spec(s)),
        }
    }
}

impl Serialize for SasSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SasSpecFile::from_spec(self).serialize(s)
    }
}

impl Serialize for SfllSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SfllSpecFile::from_spec(self).serialize(s)
    }
}
