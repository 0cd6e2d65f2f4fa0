//! Query accounting.
//!
//! Every oracle value-query charged by any phase of the algorithms lands in
//! one of four monotone counters: walk setup (querying all of S up front),
//! walk steps (one query plus one erasing query per step), classical scans,
//! and the emulated Grover fallback of the multiple-collision driver.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub setup_queries: u64,
    pub walk_queries: u64,
    pub classical_queries: u64,
    pub grover_charged: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_setup(&mut self, q: u64) {
        self.setup_queries += q;
    }

    /// One walk step costs two queries: the query and the erasure.
    pub fn charge_walk_steps(&mut self, steps: u64) {
        self.walk_queries += 2 * steps;
    }

    pub fn charge_classical(&mut self, q: u64) {
        self.classical_queries += q;
    }

    pub fn charge_grover(&mut self, q: u64) {
        self.grover_charged += q;
    }

    pub fn absorb(&mut self, other: &QueryLedger) {
        self.setup_queries += other.setup_queries;
        self.walk_queries += other.walk_queries;
        self.classical_queries += other.classical_queries;
        self.grover_charged += other.grover_charged;
    }

    pub fn total(&self) -> u64 {
        self.setup_queries + self.walk_queries + self.classical_queries + self.grover_charged
    }
}
