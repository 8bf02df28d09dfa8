//! Totally ordered edge weights.
//!
//! GHS needs every edge weight to be distinct. Raw weights are extended with
//! a tie-breaker: either the edge's endpoint pair ([`ExtendedWeight`]) or,
//! once every worker has confirmed that its local raw weights are pairwise
//! distinct, just the lowest rank of a worker storing the edge
//! ([`CompressedWeight`]).
//!
//! Raw weights are compared with [`f64::total_cmp`], i.e. exactly and
//! bitwise; there is no epsilon.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::graph::LocalGraph;
use crate::{Error, VertexId, WorkerId};

/// Edge weight extended with its endpoint pair, ordered lexicographically on
/// `(w, tie_lo, tie_hi)`.
#[derive(Clone, Copy, Debug)]
pub struct ExtendedWeight {
    pub w: f64,
    pub tie_lo: VertexId,
    pub tie_hi: VertexId,
}

/// Build the extended weight of edge `(u, v)`. Self-loops have no valid
/// extended weight.
pub fn extended_weight(u: VertexId, v: VertexId, w: f64) -> Result<ExtendedWeight, Error> {
    if u == v {
        return Err(Error::param(format!("self-loop on vertex {u} has no extended weight")));
    }
    Ok(ExtendedWeight { w, tie_lo: u.min(v), tie_hi: u.max(v) })
}

impl ExtendedWeight {
    /// The 64-bit tie-breaker: `min(u, v)` followed by `max(u, v)`.
    pub fn special_id(&self) -> u64 {
        (u64::from(self.tie_lo) << 32) | u64::from(self.tie_hi)
    }

    pub fn key(&self) -> WeightKey {
        WeightKey { w: self.w, tie: self.special_id() }
    }
}

impl PartialEq for ExtendedWeight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtendedWeight {}

impl PartialOrd for ExtendedWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedWeight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.w
            .total_cmp(&other.w)
            .then(self.tie_lo.cmp(&other.tie_lo))
            .then(self.tie_hi.cmp(&other.tie_hi))
    }
}

/// Raw weight plus the minimal rank of the workers storing the edge.
///
/// Only a valid total order when [`verify_local_uniqueness`] holds on every
/// worker: two distinct edges with the same raw weight must then live on
/// different lowest-rank workers.
#[derive(Clone, Copy, Debug)]
pub struct CompressedWeight {
    pub w: f64,
    pub tie_rank: u32,
}

pub fn compress_weight(ew: ExtendedWeight, owner_ranks: (WorkerId, WorkerId)) -> CompressedWeight {
    let rank = owner_ranks.0.min(owner_ranks.1);
    CompressedWeight { w: ew.w, tie_rank: u32::try_from(rank).expect("worker rank fits in 32 bits") }
}

impl CompressedWeight {
    pub fn key(&self) -> WeightKey {
        WeightKey { w: self.w, tie: u64::from(self.tie_rank) }
    }
}

impl PartialEq for CompressedWeight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CompressedWeight {}

impl PartialOrd for CompressedWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CompressedWeight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.w.total_cmp(&other.w).then(self.tie_rank.cmp(&other.tie_rank))
    }
}

/// The comparison key the engine actually works with: a raw weight and a
/// 64-bit tie-breaker whose meaning depends on the wire mode (special id in
/// wide mode, owner rank in compressed mode).
///
/// Ordering is lexicographic on `(w, tie)`, which for wide keys coincides
/// with the [`ExtendedWeight`] order and for compressed keys with the
/// [`CompressedWeight`] order.
#[derive(Clone, Copy, Debug)]
pub struct WeightKey {
    pub w: f64,
    pub tie: u64,
}

impl WeightKey {
    /// Weight reported by a fragment with no outgoing edge.
    pub const INFINITY: WeightKey = WeightKey { w: f64::INFINITY, tie: u64::MAX };

    pub fn is_infinite(&self) -> bool {
        self.w == f64::INFINITY
    }
}

impl PartialEq for WeightKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for WeightKey {}

impl PartialOrd for WeightKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WeightKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.w.total_cmp(&other.w).then(self.tie.cmp(&other.tie))
    }
}

/// True iff no two distinct locally stored edges share a raw weight.
///
/// An edge with both endpoints on this worker occupies two CSR slots; it is
/// counted once.
pub fn verify_local_uniqueness(g: &LocalGraph) -> bool {
    let mut seen = HashSet::with_capacity(g.num_local_edges());
    for (u, v, ew) in g.entries() {
        if g.owns(v) && v < u {
            continue;
        }
        if !seen.insert(ew.w.to_bits()) {
            return false;
        }
    }
    true
}
