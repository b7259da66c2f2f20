//! Bounded-length walk counting and per-length transition probabilities.
//!
//! A walk is an arc sequence that may repeat vertices. For a source `a`,
//! `counts[p][b]` is the number of walks of length exactly `p` from `a`
//! ending at `b`, and `P^p(a,b)` divides that count by the total number of
//! length-`p` walks leaving `a`. The access value weights those
//! probabilities by a strictly decreasing per-length weight sequence.
//!
//! Two engines produce identical inventories: an explicit queue that extends
//! every frontier walk by every outgoing arc (kept as the reference oracle),
//! and a per-length dynamic program used everywhere performance matters.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Largest walk total representable exactly in f64.
const MAX_EXACT_COUNT: f64 = 9_007_199_254_740_992.0; // 2^53

/// Per-length walk weights, strictly decreasing and positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightScheme {
    weights: Vec<f64>,
}

impl WeightScheme {
    pub fn new(weights: Vec<f64>) -> Result<WeightScheme> {
        if weights.is_empty() {
            return Err(Error::invalid("weight scheme needs at least one length"));
        }
        for w in &weights {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::invalid("weights must be positive and finite"));
            }
        }
        if weights.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid(
                "weights must strictly decrease with walk length",
            ));
        }
        Ok(WeightScheme { weights })
    }

    /// Maximum walk length covered by this scheme.
    pub fn p_max(&self) -> usize {
        self.weights.len()
    }

    /// Weight for walks of length `p` (1-based).
    pub fn weight(&self, p: usize) -> f64 {
        self.weights[p - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Upper bound for any access value under this scheme.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Geometric halving weights w_p = 2^-p, the default scheme: short walks
/// dominate and the access value stays below 1.
pub fn default_weights(p_max: usize) -> Result<WeightScheme> {
    if p_max < 1 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    WeightScheme::new((1..=p_max).map(|p| 0.5f64.powi(p as i32)).collect())
}

/// Walk counts from one source, grouped by length and endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkInventory {
    source: NodeId,
    /// Node ids in dense-index order, mirroring the graph.
    nodes: Vec<NodeId>,
    /// counts[p-1][target_index] for p in 1..=p_max.
    counts: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

impl WalkInventory {
    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn p_max(&self) -> usize {
        self.counts.len()
    }

    /// Number of length-`p` walks from the source ending at `b`.
    pub fn count(&self, p: usize, b: NodeId) -> Result<f64> {
        self.check_length(p)?;
        let idx = self.node_index(b)?;
        Ok(self.counts[p - 1][idx])
    }

    /// Total number of length-`p` walks leaving the source.
    pub fn total(&self, p: usize) -> Result<f64> {
        self.check_length(p)?;
        Ok(self.totals[p - 1])
    }

    pub fn counts_for_length(&self, p: usize) -> Result<&[f64]> {
        self.check_length(p)?;
        Ok(&self.counts[p - 1])
    }

    fn check_length(&self, p: usize) -> Result<()> {
        if p < 1 || p > self.p_max() {
            return Err(Error::invalid(format!(
                "walk length {p} outside 1..={}",
                self.p_max()
            )));
        }
        Ok(())
    }

    fn node_index(&self, b: NodeId) -> Result<usize> {
        self.nodes
            .binary_search(&b)
            .map_err(|_| Error::UnknownNode(b))
    }
}

/// Reference engine: breadth-first extension of every walk by every outgoing
/// arc, one queue entry per walk. Exponential in `p_max`; intended for small
/// graphs and as the oracle for [`walk_count_dp`].
pub fn enumerate_walks(g: &Graph, a: NodeId, p_max: usize) -> Result<WalkInventory> {
    if p_max < 1 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    let src = g.index_of(a)?;
    let n = g.node_count();
    let mut counts = vec![vec![0.0f64; n]; p_max];
    let mut totals = vec![0.0f64; p_max];

    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for &b in g.out_neighbors_idx(src) {
        queue.push_back((b, 1));
    }
    while let Some((end, len)) = queue.pop_front() {
        counts[len - 1][end] += 1.0;
        totals[len - 1] += 1.0;
        if totals[len - 1] > MAX_EXACT_COUNT {
            return Err(Error::Overflow(format!(
                "length-{len} walk total from node {a} exceeds 2^53"
            )));
        }
        if len < p_max {
            for &next in g.out_neighbors_idx(end) {
                queue.push_back((next, len + 1));
            }
        }
    }

    Ok(WalkInventory {
        source: a,
        nodes: g.node_ids().to_vec(),
        counts,
        totals,
    })
}

/// Fast engine: counts of length p are the adjacency push of counts of
/// length p-1. Count-identical to [`enumerate_walks`].
pub fn walk_count_dp(g: &Graph, a: NodeId, p_max: usize) -> Result<WalkInventory> {
    if p_max < 1 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    let src = g.index_of(a)?;
    let counts = walk_counts_from(g, src, p_max)?;
    let totals = counts.iter().map(|row| row.iter().sum()).collect();
    Ok(WalkInventory {
        source: a,
        nodes: g.node_ids().to_vec(),
        counts,
        totals,
    })
}

/// DP core over dense indices; shared with the similarity matrix builder.
pub(crate) fn walk_counts_from(g: &Graph, src: usize, p_max: usize) -> Result<Vec<Vec<f64>>> {
    let n = g.node_count();
    let mut counts: Vec<Vec<f64>> = Vec::with_capacity(p_max);
    let mut prev = vec![0.0f64; n];
    prev[src] = 1.0;
    for len in 1..=p_max {
        let mut cur = vec![0.0f64; n];
        for (x, &c) in prev.iter().enumerate() {
            if c > 0.0 {
                for &y in g.out_neighbors_idx(x) {
                    cur[y] += c;
                }
            }
        }
        let total: f64 = cur.iter().sum();
        if total > MAX_EXACT_COUNT {
            return Err(Error::Overflow(format!(
                "length-{len} walk total from node {} exceeds 2^53",
                g.id_of(src)
            )));
        }
        counts.push(cur.clone());
        prev = cur;
    }
    Ok(counts)
}

/// Probability of reaching `b` from the inventory's source in exactly `p`
/// steps. Zero when the source has no length-`p` walks at all.
pub fn transition_probability(inv: &WalkInventory, b: NodeId, p: usize) -> Result<f64> {
    let count = inv.count(p, b)?;
    let total = inv.totals[p - 1];
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(count / total)
}

/// Access value: per-length transition probabilities folded under the weight
/// scheme. Requires the inventory to cover every weighted length.
pub fn access_value(inv: &WalkInventory, b: NodeId, ws: &WeightScheme) -> Result<f64> {
    if ws.p_max() > inv.p_max() {
        return Err(Error::invalid(format!(
            "inventory covers lengths 1..={} but the weight scheme needs {}",
            inv.p_max(),
            ws.p_max()
        )));
    }
    let idx = inv.node_index(b)?;
    let mut h = 0.0;
    for p in 1..=ws.p_max() {
        let total = inv.totals[p - 1];
        if total > 0.0 {
            h += ws.weight(p) * (inv.counts[p - 1][idx] / total);
        }
    }
    Ok(h)
}
