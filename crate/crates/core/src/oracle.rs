//! Sequential reference: Kruskal's algorithm over a union–find.

use std::collections::BTreeSet;

use crate::exact::ExactSum;
use crate::graph::{Edge, EdgeList};
use crate::weights::ExtendedWeight;
use crate::VertexId;

/// Union by rank with path compression.
#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    sets: usize,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), rank: vec![0; n], sets: n }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            cur = std::mem::replace(&mut self.parent[cur], root);
        }
        root
    }

    /// Returns false if `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.sets -= 1;
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Number of disjoint sets.
    pub fn count(&self) -> usize {
        self.sets
    }
}

/// A spanning forest and its exact weight.
#[derive(Clone, Debug)]
pub struct Forest {
    pub edges: EdgeList,
    pub weight: ExactSum,
    pub components: usize,
}

/// Minimum spanning forest under the extended-weight order.
pub fn kruskal_msf(g: &EdgeList) -> Forest {
    kruskal_msf_by(g, |e| e.extended_weight())
}

/// Kruskal with a caller-supplied total order on edges.
pub fn kruskal_msf_by<K: Ord>(g: &EdgeList, key: impl Fn(&Edge) -> K) -> Forest {
    let mut order: Vec<(K, usize)> = g.edges.iter().enumerate().map(|(i, e)| (key(e), i)).collect();
    order.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut ds = DisjointSet::new(g.num_vertices);
    let mut chosen = Vec::with_capacity(g.num_vertices.saturating_sub(1));
    for (_, i) in order {
        let e = g.edges[i];
        if ds.union(e.u as usize, e.v as usize) {
            chosen.push(e);
        }
    }
    let weight = chosen.iter().map(|e| e.w).collect();
    Forest { edges: EdgeList::new(g.num_vertices, chosen), weight, components: ds.count() }
}

fn pair_set(g: &EdgeList) -> BTreeSet<(VertexId, VertexId)> {
    g.edges.iter().map(Edge::endpoints).collect()
}

/// True iff both edge lists contain the same unordered endpoint pairs.
pub fn forests_equal(a: &EdgeList, b: &EdgeList) -> bool {
    a.edges.len() == b.edges.len() && pair_set(a) == pair_set(b)
}

/// Lexicographically first endpoint pair present in exactly one of the two
/// lists.
pub fn first_difference(a: &EdgeList, b: &EdgeList) -> Option<(VertexId, VertexId)> {
    let (sa, sb) = (pair_set(a), pair_set(b));
    sa.symmetric_difference(&sb).next().copied()
}

/// Number of connected components of `g`.
pub fn count_components(g: &EdgeList) -> usize {
    let mut ds = DisjointSet::new(g.num_vertices);
    for e in &g.edges {
        ds.union(e.u as usize, e.v as usize);
    }
    ds.count()
}

/// True iff the edges contain no cycle.
pub fn is_acyclic(g: &EdgeList) -> bool {
    let mut ds = DisjointSet::new(g.num_vertices);
    g.edges.iter().all(|e| ds.union(e.u as usize, e.v as usize))
}

/// Sorts an edge list by extended weight; handy for stable printing.
pub fn sorted_by_weight(g: &EdgeList) -> Vec<Edge> {
    let mut v = g.edges.clone();
    v.sort_by_key(|e| -> ExtendedWeight { e.extended_weight() });
    v
}
