//! Distributed minimum spanning forest over simulated workers.
//!
//! The engine runs the Gallager–Humblet–Spira fragment-merging protocol with
//! a few changes aimed at distributed-memory machines:
//!
//! * `Test` messages live in their own deferral queue that is retried less
//!   often than the main queue,
//! * edges are located on message receipt through an open-addressed hash
//!   table keyed by `(sender << 32) | receiver`,
//! * protocol messages are bit-packed (80-bit short, 152-bit long) and
//!   aggregated per destination worker,
//! * termination is detected by global quiescence, so disconnected inputs
//!   produce a minimum spanning forest.
//!
//! A typical run generates a graph, removes loops and parallel edges, and
//! hands it to [`engine::run`]:
//!
//! ```
//! use ghsf::engine::{self, EngineConfig};
//! use ghsf::graph::{generate_rmat, preprocess};
//! use ghsf::oracle::{forests_equal, kruskal_msf};
//!
//! let graph = preprocess(generate_rmat(6, 8, 1).unwrap());
//! let cfg = EngineConfig { num_workers: 4, quiescence_interval: 64, ..EngineConfig::default() };
//! let report = engine::run(&graph, &cfg).unwrap();
//! assert!(forests_equal(&report.forest, &kruskal_msf(&graph).edges));
//! ```

pub mod edge_index;
pub mod engine;
mod error;
pub mod exact;
pub mod graph;
pub mod oracle;
pub mod protocol;
pub mod transport;
pub mod weights;

pub use error::Error;

/// Global vertex identifier. Vertex ids are 32-bit machine words on the wire.
pub type VertexId = u32;

/// Index of a worker (a simulated process).
pub type WorkerId = usize;
