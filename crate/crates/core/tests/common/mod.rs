//! Shared helpers for the integration suites.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ghdinc::hypergraph::{Hypergraph, VertexSet};

/// Seeded random hypergraph: up to `max_edges` edges of rank at most 4
/// over a pool of at most 12 vertices. Vertices that end up in no edge do
/// not exist. A mix of sparse and dense pools keeps both acyclic and
/// cyclic instances well represented.
pub fn random_hypergraph(rng: &mut ChaCha8Rng, max_edges: usize) -> Hypergraph {
    let n_edges = rng.random_range(1..=max_edges);
    let pool = if rng.random_range(0..3) == 0 {
        rng.random_range(2..=12usize)
    } else {
        rng.random_range(3..=9usize)
    };
    let mut edges: Vec<(String, VertexSet)> = Vec::new();
    for i in 0..n_edges {
        let rank = rng.random_range(1..=4.min(pool));
        let mut verts = BTreeSet::new();
        while verts.len() < rank {
            verts.insert(format!("v{}", rng.random_range(0..pool)));
        }
        edges.push((format!("e{i}"), verts));
    }
    Hypergraph::from_named_edges(edges).expect("generated edges are non-empty")
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
