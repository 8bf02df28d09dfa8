//! Synthetic graph generators: RMAT, SSCA2-style random cliques and uniform
//! random. All are pure functions of their arguments and seed.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Edge, EdgeList};
use crate::{Error, VertexId};

/// RMAT quadrant probabilities `(a, b, c, d)`, the Graph500 values.
pub const RMAT_PROBABILITIES: (f64, f64, f64, f64) = (0.57, 0.19, 0.19, 0.05);

/// Largest clique the SSCA2 generator produces. Clique sizes are uniform in
/// `1..=48`; a vertex then lands in a clique of expected size about 32.3,
/// which together with the inter-clique edges puts the average degree near
/// 32.
pub const SSCA2_MAX_CLIQUE: u32 = 48;

/// Probability that an SSCA2 vertex gets one edge into another clique.
pub const SSCA2_INTER_CLIQUE_PROB: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Rmat,
    Ssca2,
    Uniform,
}

impl GraphKind {
    pub const ALL: [GraphKind; 3] = [GraphKind::Rmat, GraphKind::Ssca2, GraphKind::Uniform];

    /// Raw (not yet preprocessed) graph of this kind. SSCA2 ignores
    /// `avg_degree`; its density is fixed by the clique sizes.
    pub fn generate(self, scale: u32, avg_degree: u32, seed: u64) -> Result<EdgeList, Error> {
        match self {
            GraphKind::Rmat => generate_rmat(scale, avg_degree, seed),
            GraphKind::Ssca2 => generate_ssca2(scale, seed),
            GraphKind::Uniform => generate_uniform_random(scale, avg_degree, seed),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Rmat => "rmat",
            GraphKind::Ssca2 => "ssca2",
            GraphKind::Uniform => "uniform",
        })
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "rmat" => Ok(GraphKind::Rmat),
            "ssca2" => Ok(GraphKind::Ssca2),
            "uniform" | "random" => Ok(GraphKind::Uniform),
            other => Err(Error::param(format!("unknown graph kind {other:?}"))),
        }
    }
}

fn check_scale(scale: u32) -> Result<usize, Error> {
    if !(1..=31).contains(&scale) {
        return Err(Error::param(format!("scale {scale} outside 1..=31")));
    }
    Ok(1usize << scale)
}

fn check_degree(avg_degree: u32) -> Result<(), Error> {
    if avg_degree == 0 {
        return Err(Error::param("average degree must be at least 1"));
    }
    Ok(())
}

/// Uniform in the open interval (0, 1); zero is rejected, one never occurs.
fn weight(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let w: f64 = rng.random();
        if w > 0.0 {
            return w;
        }
    }
}

/// RMAT graph with `2^scale` vertices and `avg_degree * 2^scale` raw edges.
pub fn generate_rmat(scale: u32, avg_degree: u32, seed: u64) -> Result<EdgeList, Error> {
    let n = check_scale(scale)?;
    check_degree(avg_degree)?;
    let (a, b, c, _) = RMAT_PROBABILITIES;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = n * avg_degree as usize;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (mut u, mut v) = (0 as VertexId, 0 as VertexId);
        for bit in (0..scale).rev() {
            let r: f64 = rng.random();
            let (du, dv) = if r < a {
                (0, 0)
            } else if r < a + b {
                (0, 1)
            } else if r < a + b + c {
                (1, 0)
            } else {
                (1, 1)
            };
            u |= du << bit;
            v |= dv << bit;
        }
        edges.push(Edge::new(u, v, weight(&mut rng)));
    }
    Ok(EdgeList::new(n, edges))
}

/// Random graph with `avg_degree * 2^scale` raw edges whose endpoints are
/// uniform over the vertex set.
pub fn generate_uniform_random(scale: u32, avg_degree: u32, seed: u64) -> Result<EdgeList, Error> {
    let n = check_scale(scale)?;
    check_degree(avg_degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = n * avg_degree as usize;
    let edges = (0..m)
        .map(|_| {
            let u = rng.random_range(0..n) as VertexId;
            let v = rng.random_range(0..n) as VertexId;
            Edge::new(u, v, weight(&mut rng))
        })
        .collect();
    Ok(EdgeList::new(n, edges))
}

/// SSCA2 output along with the clique layout.
#[derive(Clone, Debug)]
pub struct Ssca2Graph {
    pub graph: EdgeList,
    /// Cliques as contiguous vertex ranges, covering all vertices in order.
    pub cliques: Vec<Range<VertexId>>,
}

pub fn generate_ssca2(scale: u32, seed: u64) -> Result<EdgeList, Error> {
    generate_ssca2_with_cliques(scale, seed).map(|g| g.graph)
}

/// Randomly connected cliques: vertices are cut into consecutive cliques of
/// size uniform in `1..=SSCA2_MAX_CLIQUE`, every intra-clique pair is joined,
/// and each vertex gets one extra edge into a different clique with
/// probability [`SSCA2_INTER_CLIQUE_PROB`].
pub fn generate_ssca2_with_cliques(scale: u32, seed: u64) -> Result<Ssca2Graph, Error> {
    let n = check_scale(scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_clique = (SSCA2_MAX_CLIQUE as usize).min(n);

    let mut cliques = Vec::new();
    let mut clique_of = Vec::with_capacity(n);
    let mut start = 0usize;
    while start < n {
        let size = rng.random_range(1..=max_clique).min(n - start);
        clique_of.extend(std::iter::repeat_n(cliques.len(), size));
        cliques.push(start as VertexId..(start + size) as VertexId);
        start += size;
    }

    let mut edges = Vec::new();
    for c in &cliques {
        for u in c.clone() {
            for v in u + 1..c.end {
                edges.push(Edge::new(u, v, weight(&mut rng)));
            }
        }
    }
    if cliques.len() > 1 {
        for u in 0..n {
            if rng.random_bool(SSCA2_INTER_CLIQUE_PROB) {
                let v = loop {
                    let v = rng.random_range(0..n);
                    if clique_of[v] != clique_of[u] {
                        break v;
                    }
                };
                edges.push(Edge::new(u as VertexId, v as VertexId, weight(&mut rng)));
            }
        }
    }
    Ok(Ssca2Graph { graph: EdgeList::new(n, edges), cliques })
}
