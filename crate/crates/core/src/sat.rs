//! Satisfiability engine interface.
//!
//! Literals are DIMACS-style nonzero integers: variable `v` is `v`, its
//! negation is `-v`. Engines accept clauses incrementally and solve under
//! unit assumptions, so a single instance can be reused across attack
//! iterations.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SatError {
    #[error("solver failure: {0}")]
    Engine(String),
}

/// Anything that can allocate variables and take clauses.
pub trait ClauseSink {
    fn new_var(&mut self) -> i32;
    fn add_clause(&mut self, lits: &[i32]);
}

pub trait SatEngine: ClauseSink {
    /// `Ok(true)` when satisfiable under `assumptions`; the model is then
    /// available through [`SatEngine::value`].
    fn solve(&mut self, assumptions: &[i32]) -> Result<bool, SatError>;
    fn value(&self, var: i32) -> Option<bool>;
    fn num_vars(&self) -> u32;
}

/// [`SatEngine`] backed by the `varisat` CDCL solver.
pub struct VarisatEngine {
    solver: varisat::Solver<'static>,
    num_vars: i32,
    model: Vec<bool>,
}

impl Default for VarisatEngine {
    fn default() -> Self {
        VarisatEngine { solver: varisat::Solver::new(), num_vars: 0, model: Vec::new() }
    }
}

impl VarisatEngine {
    pub fn new() -> Self {
        Self::default()
    }
}

fn lit(l: i32) -> varisat::Lit {
    varisat::Lit::from_dimacs(l as isize)
}

impl ClauseSink for VarisatEngine {
    fn new_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars
    }

    fn add_clause(&mut self, lits: &[i32]) {
        debug_assert!(lits.iter().all(|&l| l != 0 && l.abs() <= self.num_vars));
        let lits: Vec<varisat::Lit> = lits.iter().map(|&l| lit(l)).collect();
        varisat::ExtendFormula::add_clause(&mut self.solver, &lits);
    }
}

impl SatEngine for VarisatEngine {
    fn solve(&mut self, assumptions: &[i32]) -> Result<bool, SatError> {
        let lits: Vec<varisat::Lit> = assumptions.iter().map(|&l| lit(l)).collect();
        self.solver.assume(&lits);
        let sat = self.solver.solve().map_err(|e| SatError::Engine(e.to_string()))?;
        self.model.clear();
        if sat {
            self.model.resize(self.num_vars as usize + 1, false);
            for l in self.solver.model().unwrap_or_default() {
                let v = l.var().to_dimacs() as usize;
                if v < self.model.len() {
                    self.model[v] = l.is_positive();
                }
            }
        }
        Ok(sat)
    }

    fn value(&self, var: i32) -> Option<bool> {
        self.model.get(var as usize).copied().filter(|_| var > 0)
    }

    fn num_vars(&self) -> u32 {
        self.num_vars as u32
    }
}

/// A plain clause list. Used to replay formulas into fresh engines and to
/// export DIMACS.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClauseLog {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
}

impl ClauseSink for ClauseLog {
    fn new_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars as i32
    }

    fn add_clause(&mut self, lits: &[i32]) {
        self.clauses.push(lits.to_vec());
    }
}

impl ClauseLog {
    pub fn replay_into(&self, sink: &mut impl ClauseSink) {
        // Variables are allocated densely, so replaying allocation keeps numbering.
        for _ in 0..self.num_vars {
            sink.new_var();
        }
        for c in &self.clauses {
            sink.add_clause(c);
        }
    }

    /// DIMACS text; `assumptions` are appended as unit clauses.
    pub fn to_dimacs(&self, assumptions: &[i32]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p cnf {} {}", self.num_vars, self.clauses.len() + assumptions.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{l} ");
            }
            s.push_str("0\n");
        }
        for a in assumptions {
            let _ = writeln!(s, "{a} 0");
        }
        s
    }
}

/// Forwards every clause to an engine while keeping a copy.
pub struct Recording<'a, E> {
    pub engine: &'a mut E,
    pub log: &'a mut ClauseLog,
}

impl<E: ClauseSink> ClauseSink for Recording<'_, E> {
    fn new_var(&mut self) -> i32 {
        let v = self.engine.new_var();
        let l = self.log.new_var();
        debug_assert_eq!(v, l);
        v
    }

    fn add_clause(&mut self, lits: &[i32]) {
        self.engine.add_clause(lits);
        self.log.add_clause(lits);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_under_assumptions() {
        let mut e = VarisatEngine::new();
        let a = e.new_var();
        let b = e.new_var();
        e.add_clause(&[a, b]);
        e.add_clause(&[-a, b]);
        assert!(e.solve(&[]).unwrap());
        assert_eq!(e.value(b), Some(true));
        assert!(!e.solve(&[-b]).unwrap());
        assert!(e.solve(&[a]).unwrap());
    }

    #[test]
    fn empty_clause_is_unsat() {
        let mut e = VarisatEngine::new();
        let a = e.new_var();
        e.add_clause(&[a]);
        e.add_clause(&[]);
        assert!(!e.solve(&[]).unwrap());
    }

    #[test]
    fn dimacs_export() {
        let mut log = ClauseLog::default();
        let a = log.new_var();
        log.add_clause(&[a, -a]);
        assert_eq!(log.to_dimacs(&[a]), "p cnf 1 2\n1 -1 0\n1 0\n");
    }
}
