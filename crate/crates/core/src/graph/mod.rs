//! Edge lists, preprocessing, block partitioning and CSR storage.

mod generate;
mod io;

use std::ops::Range;

pub use generate::{
    generate_rmat, generate_ssca2, generate_ssca2_with_cliques, generate_uniform_random, GraphKind,
    Ssca2Graph, RMAT_PROBABILITIES, SSCA2_INTER_CLIQUE_PROB, SSCA2_MAX_CLIQUE,
};
pub use io::{read_edge_list, read_edge_list_from, write_edge_list, write_edge_list_to, EdgeFormat};

use crate::weights::{extended_weight, ExtendedWeight};
use crate::{Error, VertexId, WorkerId};

/// An undirected weighted edge. Orientation carries no meaning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub w: f64,
}

impl Edge {
    pub fn new(u: VertexId, v: VertexId, w: f64) -> Self {
        Edge { u, v, w }
    }

    /// `(min, max)` endpoint pair.
    pub fn endpoints(&self) -> (VertexId, VertexId) {
        (self.u.min(self.v), self.u.max(self.v))
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    /// # Panics
    /// On a self-loop.
    pub fn extended_weight(&self) -> ExtendedWeight {
        extended_weight(self.u, self.v, self.w).expect("self-loop has no extended weight")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeList {
    pub num_vertices: usize,
    pub edges: Vec<Edge>,
}

impl EdgeList {
    pub fn new(num_vertices: usize, edges: Vec<Edge>) -> Self {
        EdgeList { num_vertices, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Checks the post-preprocessing invariants: ids in range, no loops, no
    /// repeated endpoint pair.
    pub fn validate(&self) -> Result<(), Error> {
        let mut pairs = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.u as usize >= self.num_vertices || e.v as usize >= self.num_vertices {
                return Err(Error::Format(format!(
                    "edge ({}, {}) out of range for {} vertices",
                    e.u, e.v, self.num_vertices
                )));
            }
            if e.is_loop() {
                return Err(Error::Format(format!("self-loop on vertex {}", e.u)));
            }
            pairs.push(e.endpoints());
        }
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Format(format!("parallel edges between {} and {}", w[0].0, w[0].1)));
        }
        Ok(())
    }
}

/// Removes self-loops and parallel edges, keeping the lightest copy of each
/// endpoint pair (by extended weight). Output is sorted by endpoint pair and
/// keeps the surviving edge's orientation.
pub fn preprocess(raw: EdgeList) -> EdgeList {
    let EdgeList { num_vertices, mut edges } = raw;
    edges.retain(|e| !e.is_loop());
    edges.sort_by(|a, b| a.endpoints().cmp(&b.endpoints()).then(a.w.total_cmp(&b.w)));
    edges.dedup_by(|later, kept| later.endpoints() == kept.endpoints());
    EdgeList { num_vertices, edges }
}

/// Edge state as seen from one endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeState {
    /// Not yet classified.
    Basic,
    /// Part of the spanning forest.
    Branch,
    /// Known to join two vertices of the same fragment.
    Rejected,
}

/// The slice of the graph owned by one worker, in CSR form.
///
/// Rows cover the worker's contiguous vertex block; each row lists every
/// neighbour of the vertex (an edge whose endpoints sit on different workers
/// is stored by both). Rows are sorted by ascending extended weight, so the
/// first entry of a row is the vertex's lightest edge.
#[derive(Clone, Debug)]
pub struct LocalGraph {
    pub worker_rank: WorkerId,
    pub num_workers: usize,
    pub num_global_vertices: usize,
    /// Vertices per worker block; the last block may be shorter.
    pub block_size: usize,
    pub vertex_range: Range<VertexId>,
    pub row_offsets: Vec<usize>,
    pub col_targets: Vec<VertexId>,
    pub edge_weights: Vec<ExtendedWeight>,
    pub edge_states: Vec<EdgeState>,
}

impl LocalGraph {
    pub fn num_local_vertices(&self) -> usize {
        (self.vertex_range.end - self.vertex_range.start) as usize
    }

    /// Number of CSR entries (intra-worker edges count twice).
    pub fn num_local_edges(&self) -> usize {
        self.col_targets.len()
    }

    pub fn owns(&self, v: VertexId) -> bool {
        self.vertex_range.contains(&v)
    }

    pub fn owner_of(&self, v: VertexId) -> WorkerId {
        v as usize / self.block_size
    }

    /// CSR slot range of local vertex `local` (0-based within the block).
    pub fn row(&self, local: usize) -> Range<usize> {
        self.row_offsets[local]..self.row_offsets[local + 1]
    }

    pub fn global_id(&self, local: usize) -> VertexId {
        self.vertex_range.start + local as VertexId
    }

    /// Every CSR entry as `(row vertex, neighbour, weight)`.
    pub fn entries(&self) -> impl Iterator<Item = (VertexId, VertexId, ExtendedWeight)> + '_ {
        (0..self.num_local_vertices()).flat_map(move |local| {
            let u = self.global_id(local);
            self.row(local).map(move |i| (u, self.col_targets[i], self.edge_weights[i]))
        })
    }
}

/// Splits a preprocessed graph into `num_workers` contiguous vertex blocks of
/// `ceil(V / num_workers)` vertices each.
///
/// Fails if any worker would end up with an empty block.
pub fn partition_block(g: &EdgeList, num_workers: usize) -> Result<Vec<LocalGraph>, Error> {
    let n = g.num_vertices;
    if num_workers == 0 {
        return Err(Error::param("worker count must be at least 1"));
    }
    if n == 0 {
        return Err(Error::param("cannot partition a graph with no vertices"));
    }
    if n > (VertexId::MAX as usize) + 1 {
        return Err(Error::param(format!("{n} vertices do not fit 32-bit vertex ids")));
    }
    let block = n.div_ceil(num_workers);
    if (num_workers - 1) * block >= n {
        return Err(Error::param(format!(
            "{num_workers} workers over {n} vertices leaves a worker with no vertices"
        )));
    }

    let mut degree = vec![0usize; n];
    for e in &g.edges {
        if e.is_loop() {
            return Err(Error::param(format!("graph not preprocessed: self-loop on {}", e.u)));
        }
        degree[e.u as usize] += 1;
        degree[e.v as usize] += 1;
    }

    (0..num_workers)
        .map(|rank| {
            let first = rank * block;
            let end = ((rank + 1) * block).min(n);
            let mut row_offsets = Vec::with_capacity(end - first + 1);
            row_offsets.push(0);
            for v in first..end {
                row_offsets.push(row_offsets.last().unwrap() + degree[v]);
            }
            let m = *row_offsets.last().unwrap();
            let mut fill = row_offsets.clone();
            let mut col_targets = vec![0; m];
            let mut edge_weights = vec![ExtendedWeight { w: 0.0, tie_lo: 0, tie_hi: 0 }; m];
            let in_block = |v: VertexId| (first..end).contains(&(v as usize));
            for e in &g.edges {
                let ew = e.extended_weight();
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    if in_block(a) {
                        let slot = &mut fill[a as usize - first];
                        col_targets[*slot] = b;
                        edge_weights[*slot] = ew;
                        *slot += 1;
                    }
                }
            }
            for r in row_offsets.windows(2) {
                let mut row: Vec<_> = (r[0]..r[1]).map(|i| (edge_weights[i], col_targets[i])).collect();
                row.sort_unstable_by(|x, y| x.0.cmp(&y.0));
                for (k, (ew, t)) in row.into_iter().enumerate() {
                    edge_weights[r[0] + k] = ew;
                    col_targets[r[0] + k] = t;
                }
            }
            Ok(LocalGraph {
                worker_rank: rank,
                num_workers,
                num_global_vertices: n,
                block_size: block,
                vertex_range: first as VertexId..end as VertexId,
                row_offsets,
                col_targets,
                edge_weights,
                edge_states: vec![EdgeState::Basic; m],
            })
        })
        .collect()
}

/// Inverse of [`partition_block`]: every distinct edge of the partitions,
/// sorted by endpoint pair and oriented `(min, max)`.
pub fn reassemble(parts: &[LocalGraph]) -> EdgeList {
    let n = parts.first().map_or(0, |p| p.num_global_vertices);
    let mut edges: Vec<Edge> = parts
        .iter()
        .flat_map(|p| p.entries())
        .filter(|(u, v, _)| u < v)
        .map(|(u, v, ew)| Edge::new(u, v, ew.w))
        .collect();
    edges.sort_by(|a, b| a.endpoints().cmp(&b.endpoints()));
    edges.dedup_by(|a, b| a.endpoints() == b.endpoints());
    EdgeList::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: u32) -> EdgeList {
        let edges = (0..n - 1).map(|i| Edge::new(i, i + 1, 0.1 + f64::from(i) * 0.01)).collect();
        EdgeList::new(n as usize, edges)
    }

    fn canon(g: &EdgeList) -> Vec<(u32, u32, u64)> {
        let mut v: Vec<_> = g.edges.iter().map(|e| (e.endpoints().0, e.endpoints().1, e.w.to_bits())).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn loop_only_graph_becomes_empty() {
        let g = preprocess(EdgeList::new(1, vec![Edge::new(0, 0, 0.5)]));
        assert!(g.is_empty());
    }

    #[test]
    fn parallel_edges_keep_lighter_copy() {
        let g = preprocess(EdgeList::new(2, vec![Edge::new(0, 1, 0.5), Edge::new(1, 0, 0.3)]));
        assert_eq!(g.edges, vec![Edge::new(1, 0, 0.3)]);
    }

    #[test]
    fn preprocess_is_idempotent_on_rmat() {
        let once = preprocess(generate_rmat(5, 16, 3).unwrap());
        once.validate().unwrap();
        assert_eq!(preprocess(once.clone()), once);
    }

    #[test]
    fn path_split_in_two_blocks() {
        let parts = partition_block(&path(8), 2).unwrap();
        assert_eq!(parts[0].vertex_range, 0..4);
        assert_eq!(parts[1].vertex_range, 4..8);
        let has = |p: &LocalGraph, a: u32, b: u32| p.entries().any(|(u, v, _)| u == a && v == b);
        assert!(has(&parts[0], 3, 4));
        assert!(has(&parts[1], 4, 3));
        let w0 = parts[0].entries().find(|e| e.0 == 3 && e.1 == 4).unwrap().2;
        let w1 = parts[1].entries().find(|e| e.0 == 4 && e.1 == 3).unwrap().2;
        assert_eq!(w0, w1);
    }

    #[test]
    fn single_worker_holds_everything() {
        let g = preprocess(generate_uniform_random(4, 4, 1).unwrap());
        let parts = partition_block(&g, 1).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].vertex_range, 0..16);
        assert_eq!(parts[0].num_local_edges(), 2 * g.len());
        assert_eq!(canon(&reassemble(&parts)), canon(&g));
    }

    #[test]
    fn rows_sorted_and_offsets_monotone() {
        let g = preprocess(generate_rmat(6, 8, 2).unwrap());
        for p in partition_block(&g, 3).unwrap() {
            assert!(p.row_offsets.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*p.row_offsets.last().unwrap(), p.col_targets.len());
            for local in 0..p.num_local_vertices() {
                let r = p.row(local);
                assert!(p.edge_weights[r].windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn too_many_workers_rejected() {
        assert!(partition_block(&path(4), 5).is_err());
        // ceil(5/4) = 2 leaves worker 3 empty
        assert!(partition_block(&path(5), 4).is_err());
        assert!(partition_block(&path(4), 0).is_err());
        assert!(partition_block(&path(4), 4).is_ok());
    }

    #[test]
    fn last_block_may_be_short() {
        let parts = partition_block(&path(10), 4).unwrap();
        let ranges: Vec<_> = parts.iter().map(|p| p.vertex_range.clone()).collect();
        assert_eq!(ranges, vec![0..3, 3..6, 6..9, 9..10]);
    }

    #[test]
    fn validate_catches_bad_lists() {
        assert!(EdgeList::new(2, vec![Edge::new(0, 2, 0.1)]).validate().is_err());
        assert!(EdgeList::new(2, vec![Edge::new(1, 1, 0.1)]).validate().is_err());
        assert!(EdgeList::new(2, vec![Edge::new(0, 1, 0.1), Edge::new(1, 0, 0.2)]).validate().is_err());
    }
}
