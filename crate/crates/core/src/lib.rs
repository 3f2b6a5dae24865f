//! Logic-locking laboratory: netlists, locking schemes, attacks, and error metrics.

pub mod netlist;
pub mod sat;
pub mod locking;
pub mod attacks;
pub mod metrics;
pub mod workload;
