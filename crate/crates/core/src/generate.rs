//! Seeded synthetic graphs for calibration and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeMode, Graph, NodeId};

/// Planted-partition graph: blocks of the given sizes, an undirected edge
/// within a block with probability `p_in` and across blocks with
/// probability `p_out`. Returns the graph and the planted communities.
pub fn planted_partition(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<Vec<NodeId>>)> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::invalid("block sizes must be positive"));
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("edge probabilities must be in [0, 1]"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = sizes.iter().sum();
    let mut block_of = vec![0usize; n];
    let mut communities: Vec<Vec<NodeId>> = Vec::with_capacity(sizes.len());
    let mut next = 0usize;
    for (b, &s) in sizes.iter().enumerate() {
        let members: Vec<NodeId> = (next..next + s).map(|v| v as NodeId).collect();
        for &v in &members {
            block_of[v as usize] = b;
        }
        communities.push(members);
        next += s;
    }

    let mut arcs = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let p = if block_of[a] == block_of[b] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                arcs.push((a as NodeId, b as NodeId));
            }
        }
    }
    let graph = Graph::from_arcs_with_nodes(
        Graph::from_arcs(arcs, EdgeMode::Undirected).arcs().collect(),
        (0..n as NodeId).collect(),
    );
    Ok((graph, communities))
}

/// Erdos-Renyi G(n, p) in undirected mode.
pub fn random_gnp(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("edge probability must be in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen::<f64>() < p {
                arcs.push((a as NodeId, b as NodeId));
            }
        }
    }
    Ok(Graph::from_arcs_with_nodes(
        Graph::from_arcs(arcs, EdgeMode::Undirected).arcs().collect(),
        (0..n as NodeId).collect(),
    ))
}
