//! The GHS vertex automaton, the per-worker loop, and the drivers that run a
//! set of workers to global quiescence.
//!
//! Each worker owns a contiguous vertex block. One iteration of its loop:
//!
//! 1. polls delivered blocks and dispatches each message, deferring what
//!    cannot be handled yet,
//! 2. retries the main deferral queue (`Connect`, `Report`) every iteration
//!    and the `Test` queue every `check_frequency` iterations,
//! 3. flushes all aggregation buffers every `sending_frequency` iterations,
//! 4. every `quiescence_interval` iterations joins a collective quiescence
//!    check and stops once it succeeds.
//!
//! All vertices wake up at the start of the first iteration.

mod monitor;
mod runtime;
mod stats;
mod worker;

use std::time::Duration;

use crate::edge_index::default_table_size;
use crate::exact::ExactSum;
use crate::graph::{Edge, EdgeList, LocalGraph};
use crate::oracle::DisjointSet;
use crate::protocol::{MessageKind, ProtocolError, WireMode, MAX_COMPRESSED_WORKERS};
use crate::transport::TransportError;
use crate::weights::verify_local_uniqueness;
use crate::{Error, VertexId, WorkerId};

pub use monitor::InvariantViolation;
pub use runtime::{run, run_partitioned, Simulation};
pub use stats::{interval_stats, write_interval_csv, FlushRecord, IntervalStat, MessageCounts, DEFAULT_INTERVALS};
pub use worker::{NodeState, VertexState};

/// Requested tie-breaker encoding for long messages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightMode {
    /// Compressed when every worker's raw weights are distinct and there are
    /// at most 256 workers; wide otherwise.
    #[default]
    Auto,
    /// Same check as `Auto`; falls back to wide if it fails.
    Compressed,
    Wide,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportMode {
    /// Single-threaded, seeded scheduler. Reproducible.
    #[default]
    Deterministic,
    /// One OS thread per worker.
    Threaded,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum HashTableSize {
    /// `local_edges * 5 * 11 / 13`.
    #[default]
    Default,
    /// `floor(local_edges * factor)`.
    Factor(f64),
    Fixed(usize),
}

impl HashTableSize {
    /// Resolved size for a worker with `local_edges` CSR entries, clamped to
    /// at least `local_edges + 1`.
    pub fn resolve(self, local_edges: usize) -> usize {
        let raw = match self {
            HashTableSize::Default => default_table_size(local_edges),
            HashTableSize::Factor(f) => (local_edges as f64 * f) as usize,
            HashTableSize::Fixed(n) => n,
        };
        raw.max(local_edges + 1)
    }
}

/// When the `Test` sender marks an accepted edge as `Branch`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AcceptBranching {
    /// Only when the fragment actually connects over the edge (the edge is
    /// then the fragment's minimum outgoing edge).
    #[default]
    OnConnect,
    /// Immediately on `Accept`. Produces extra `Branch` edges whenever a
    /// lighter candidate elsewhere in the fragment wins; kept for comparison.
    OnAccept,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Largest aggregated block, in bytes.
    pub max_msg_size: usize,
    /// Flush all buffers every this many iterations.
    pub sending_frequency: u64,
    /// Retry the deferred `Test` queue every this many iterations.
    pub check_frequency: u64,
    /// Attempt the collective termination check every this many iterations.
    pub quiescence_interval: u64,
    pub hash_table_size: HashTableSize,
    pub num_workers: usize,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub transport: TransportMode,
    pub accept_branching: AcceptBranching,
    /// Deterministic transport only: check forest and level invariants after
    /// every worker step.
    pub check_invariants: bool,
    /// Deterministic transport only: abort after this many scheduler steps.
    pub max_steps: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_msg_size: 10_000,
            sending_frequency: 5,
            check_frequency: 5,
            quiescence_interval: 100_000,
            hash_table_size: HashTableSize::Default,
            num_workers: 1,
            seed: 0,
            weight_mode: WeightMode::Auto,
            transport: TransportMode::Deterministic,
            accept_branching: AcceptBranching::OnConnect,
            check_invariants: false,
            max_steps: 500_000_000,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let freq = [
            ("sending_frequency", self.sending_frequency),
            ("check_frequency", self.check_frequency),
            ("quiescence_interval", self.quiescence_interval),
        ];
        for (name, v) in freq {
            if v == 0 {
                return Err(Error::param(format!("{name} must be at least 1")));
            }
        }
        if self.num_workers == 0 {
            return Err(Error::param("num_workers must be at least 1"));
        }
        let min = WireMode::Wide.long_bits().div_ceil(8);
        if self.max_msg_size < min {
            return Err(Error::param(format!("max_msg_size must be at least {min} bytes")));
        }
        if let HashTableSize::Factor(f) = self.hash_table_size {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::param(format!("hash table factor {f} must be positive")));
            }
        }
        Ok(())
    }
}

/// Picks the wire mode for a run. Compressed needs every partition to pass
/// [`verify_local_uniqueness`] and ranks that fit 8 bits.
pub fn negotiate_wire_mode(parts: &[LocalGraph], requested: WeightMode) -> WireMode {
    match requested {
        WeightMode::Wide => WireMode::Wide,
        WeightMode::Auto | WeightMode::Compressed => {
            if parts.len() <= MAX_COMPRESSED_WORKERS && parts.iter().all(verify_local_uniqueness) {
                WireMode::Compressed
            } else {
                WireMode::Wide
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("worker {worker}: vertex {vertex}: {kind} from {peer}: {detail}")]
    Protocol { worker: WorkerId, vertex: VertexId, peer: VertexId, kind: MessageKind, detail: String },
    #[error("worker {worker}: bad block: {source}")]
    Wire {
        worker: WorkerId,
        #[source]
        source: ProtocolError,
    },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("no termination after {0} scheduler steps")]
    StepLimit(u64),
    #[error("branch edges form a cycle through ({0}, {1})")]
    Cycle(VertexId, VertexId),
    #[error("worker thread panicked")]
    WorkerPanic,
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub forest: EdgeList,
    pub forest_weight: ExactSum,
    pub wire_mode: WireMode,
    /// `WeightMode::Compressed` was requested but the uniqueness check failed.
    pub wire_mode_fallback: bool,
    pub messages: MessageCounts,
    /// Largest loop-iteration count of any worker.
    pub iterations: u64,
    pub collective_rounds: u64,
    pub blocks_sent: u64,
    pub bytes_sent: u64,
    /// Every flushed block, in time order.
    pub flushes: Vec<FlushRecord>,
    pub elapsed: Duration,
    /// Scheduler steps (deterministic transport only).
    pub steps: u64,
    /// SHA-256 over the delivery sequence (deterministic transport only).
    pub trace_digest: Option<String>,
    pub violations: Vec<InvariantViolation>,
    /// Core vertices that saw both core reports come back infinite. Two per
    /// finished component with at least one edge.
    pub halted_cores: u64,
    /// Messages postponed to the main queue at least once.
    pub deferred_main: u64,
    /// `Test` messages postponed at least once.
    pub deferred_tests: u64,
}

impl RunReport {
    pub fn interval_stats(&self, intervals: usize) -> Vec<IntervalStat> {
        interval_stats(&self.flushes, intervals)
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "forest_weight={} edges={} messages={} iterations={} rounds={} blocks={} bytes={} mode={:?}{}",
            self.forest_weight,
            self.forest.len(),
            self.messages.total(),
            self.iterations,
            self.collective_rounds,
            self.blocks_sent,
            self.bytes_sent,
            self.wire_mode,
            self.trace_digest.as_ref().map(|d| format!(" trace={}", &d[..16])).unwrap_or_default(),
        )
    }
}

/// Merges per-worker branch edges into a forest, checking it is acyclic.
pub fn collect_forest(num_vertices: usize, per_worker: Vec<Vec<Edge>>) -> Result<EdgeList, EngineError> {
    let mut edges: Vec<Edge> = per_worker.into_iter().flatten().collect();
    edges.sort_by(|a, b| a.endpoints().cmp(&b.endpoints()));
    edges.dedup_by(|a, b| a.endpoints() == b.endpoints());
    let mut ds = DisjointSet::new(num_vertices);
    for e in &edges {
        if !ds.union(e.u as usize, e.v as usize) {
            return Err(EngineError::Cycle(e.u, e.v));
        }
    }
    Ok(EdgeList::new(num_vertices, edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_parameters() {
        let c = EngineConfig::default();
        assert_eq!(c.max_msg_size, 10_000);
        assert_eq!(c.sending_frequency, 5);
        assert_eq!(c.check_frequency, 5);
        assert_eq!(c.quiescence_interval, 100_000);
        assert_eq!(c.hash_table_size, HashTableSize::Default);
        c.validate().unwrap();
    }

    #[test]
    fn zero_frequencies_rejected() {
        for f in [
            |c: &mut EngineConfig| c.sending_frequency = 0,
            |c: &mut EngineConfig| c.check_frequency = 0,
            |c: &mut EngineConfig| c.quiescence_interval = 0,
            |c: &mut EngineConfig| c.num_workers = 0,
            |c: &mut EngineConfig| c.max_msg_size = 25,
        ] {
            let mut c = EngineConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn table_size_resolution() {
        assert_eq!(HashTableSize::Default.resolve(13), 55);
        assert_eq!(HashTableSize::Factor(2.0).resolve(10), 20);
        assert_eq!(HashTableSize::Fixed(3).resolve(10), 11);
    }

    #[test]
    fn merge_detects_cycles() {
        let tri = vec![vec![Edge::new(0, 1, 0.1), Edge::new(1, 2, 0.2)], vec![Edge::new(2, 0, 0.3), Edge::new(1, 0, 0.1)]];
        assert!(matches!(collect_forest(3, tri), Err(EngineError::Cycle(..))));
        let ok = vec![vec![Edge::new(0, 1, 0.1)], vec![Edge::new(1, 0, 0.1), Edge::new(2, 1, 0.2)]];
        assert_eq!(collect_forest(3, ok).unwrap().len(), 2);
    }
}
