//! Receiver-side lookup from `(sender, receiver)` to a local CSR slot.
//!
//! Keys pack the directional pair as `(sender << 32) | receiver` and are
//! placed by linear probing from `key mod table_size`. Slot key 0 (sender ==
//! receiver == 0) marks an empty slot; it cannot collide with a real edge
//! because loops are removed before partitioning.

use crate::graph::LocalGraph;
use crate::{Error, VertexId};

const EMPTY: u64 = 0;

#[inline]
pub fn pack(sender: VertexId, receiver: VertexId) -> u64 {
    (u64::from(sender) << 32) | u64::from(receiver)
}

/// Home slot of a key: `((u << 32) | v) mod table_size`.
#[inline]
pub fn get_hash(u: VertexId, v: VertexId, table_size: usize) -> usize {
    (pack(u, v) % table_size as u64) as usize
}

/// Default table size for a worker holding `local_edges` CSR entries:
/// `local_edges * 5 * 11 / 13` in integer arithmetic, and never smaller than
/// `local_edges + 1`.
pub fn default_table_size(local_edges: usize) -> usize {
    (local_edges * 5 * 11 / 13).max(local_edges + 1)
}

#[derive(Clone, Debug)]
pub struct EdgeIndexTable {
    keys: Vec<u64>,
    slots: Vec<u32>,
    len: usize,
}

impl EdgeIndexTable {
    pub fn table_size(&self) -> usize {
        self.keys.len()
    }

    /// Number of stored keys.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn insert(&mut self, sender: VertexId, receiver: VertexId, slot: u32) {
        let key = pack(sender, receiver);
        let size = self.keys.len();
        let mut i = get_hash(sender, receiver, size);
        while self.keys[i] != EMPTY {
            debug_assert_ne!(self.keys[i], key, "duplicate edge key");
            i += 1;
            if i == size {
                i = 0;
            }
        }
        self.keys[i] = key;
        self.slots[i] = slot;
        self.len += 1;
    }

    /// CSR slot of the edge a message from `sender` to `receiver` travelled
    /// on, or `None` if the receiver has no such edge.
    #[inline]
    pub fn lookup(&self, sender: VertexId, receiver: VertexId) -> Option<usize> {
        if sender == receiver {
            return None;
        }
        let key = pack(sender, receiver);
        let size = self.keys.len();
        let mut i = get_hash(sender, receiver, size);
        // Terminates: the table always keeps at least one empty slot.
        loop {
            match self.keys[i] {
                EMPTY => return None,
                k if k == key => return Some(self.slots[i] as usize),
                _ => {}
            }
            i += 1;
            if i == size {
                i = 0;
            }
        }
    }
}

/// Indexes every CSR entry of `g` under the key the receiving row vertex sees:
/// `(neighbour << 32) | row vertex`.
pub fn build_edge_index(g: &LocalGraph, table_size: usize) -> Result<EdgeIndexTable, Error> {
    let m = g.num_local_edges();
    if table_size <= m {
        return Err(Error::param(format!("hash table size {table_size} must exceed local edge count {m}")));
    }
    if m > u32::MAX as usize {
        return Err(Error::param(format!("{m} local edges exceed the 32-bit slot index")));
    }
    let mut t = EdgeIndexTable { keys: vec![EMPTY; table_size], slots: vec![0; table_size], len: 0 };
    for local in 0..g.num_local_vertices() {
        let receiver = g.global_id(local);
        for slot in g.row(local) {
            t.insert(g.col_targets[slot], receiver, slot as u32);
        }
    }
    Ok(t)
}

/// The unindexed baseline: scan the receiver's row for the sender.
pub fn linear_search(g: &LocalGraph, sender: VertexId, receiver: VertexId) -> Option<usize> {
    if !g.owns(receiver) {
        return None;
    }
    let local = (receiver - g.vertex_range.start) as usize;
    g.row(local).find(|&slot| g.col_targets[slot] == sender)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_rmat, partition_block, preprocess, Edge, EdgeList};

    #[test]
    fn hash_arithmetic() {
        assert_eq!(get_hash(0, 0, 97), 0);
        assert_eq!(get_hash(1, 0, 1 << 32), 0);
        // 2^32 + 5 = 4294967301 = 97 * 44278013 + 40
        assert_eq!(get_hash(1, 5, 97), 40);
        assert_eq!(get_hash(u32::MAX, u32::MAX, usize::MAX), u64::MAX as usize % usize::MAX);
    }

    #[test]
    fn default_sizing() {
        assert_eq!(default_table_size(13), 55);
        assert_eq!(default_table_size(100), 423);
        assert_eq!(default_table_size(0), 1);
        assert_eq!(default_table_size(1), 4);
    }

    #[test]
    fn single_edge() {
        let g = EdgeList::new(2, vec![Edge::new(0, 1, 0.5)]);
        let p = &partition_block(&g, 1).unwrap()[0];
        let t = build_edge_index(p, default_table_size(p.num_local_edges())).unwrap();
        assert_eq!(t.lookup(1, 0), Some(0));
        assert_eq!(t.lookup(0, 1), Some(1));
        assert_eq!(t.lookup(0, 0), None);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn size_must_exceed_edge_count() {
        let g = EdgeList::new(3, vec![Edge::new(0, 1, 0.5), Edge::new(1, 2, 0.25)]);
        let p = &partition_block(&g, 1).unwrap()[0];
        assert!(build_edge_index(p, 4).is_err());
        assert!(build_edge_index(p, 5).is_ok());
    }

    #[test]
    fn matches_linear_search_on_every_pair() {
        let g = preprocess(generate_rmat(4, 32, 1).unwrap());
        for p in partition_block(&g, 2).unwrap() {
            // Tight table to force long probe chains.
            let t = build_edge_index(&p, p.num_local_edges() + 1).unwrap();
            for receiver in p.vertex_range.clone() {
                for sender in 0..16 {
                    assert_eq!(t.lookup(sender, receiver), linear_search(&p, sender, receiver));
                }
            }
        }
    }
}
