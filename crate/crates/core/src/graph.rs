//! Directed graphs over integer node ids, loaded from SNAP-style text.
//!
//! Edge lists are one `from to` pair per line with optional `#` comment
//! lines. Undirected inputs are expanded into two arcs per edge because the
//! similarity computations are stated over ordered relations. Self-loops are
//! dropped and duplicate arcs are collapsed; node ids need not be contiguous,
//! an internal dense index backs the adjacency arrays.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// External node identifier as it appears in input files.
pub type NodeId = u64;

/// Whether an input edge stands for one arc or an arc in each direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    Directed,
    Undirected,
}

/// Immutable directed graph with compressed sparse-row adjacency.
///
/// Safe to share across worker threads; all computations in this crate take
/// `&Graph`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    /// Dense index -> external id, ascending.
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    /// Optional per-node ground-truth community label, dense-indexed.
    labels: Option<Vec<u64>>,
}

impl Graph {
    /// Builds a graph from raw arcs. Self-loops are dropped, duplicates
    /// collapsed; in undirected mode each pair contributes both arcs.
    pub fn from_arcs(arcs: impl IntoIterator<Item = (NodeId, NodeId)>, mode: EdgeMode) -> Graph {
        let mut ids: Vec<NodeId> = Vec::new();
        let mut raw: Vec<(NodeId, NodeId)> = Vec::new();
        for (a, b) in arcs {
            ids.push(a);
            ids.push(b);
            if a == b {
                continue;
            }
            raw.push((a, b));
            if mode == EdgeMode::Undirected {
                raw.push((b, a));
            }
        }
        ids.sort_unstable();
        ids.dedup();
        let index: HashMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let mut pairs: Vec<(usize, usize)> = raw
            .iter()
            .map(|&(a, b)| (index[&a], index[&b]))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();

        let n = ids.len();
        let mut offsets = vec![0usize; n + 1];
        for &(a, _) in &pairs {
            offsets[a + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.into_iter().map(|(_, b)| b).collect();

        Graph {
            ids,
            index,
            offsets,
            targets,
            labels: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    /// Total arcs after expansion and deduplication.
    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    /// External ids in dense-index order (ascending).
    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Dense index of an external id.
    pub fn index_of(&self, id: NodeId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    /// External id of a dense index.
    pub fn id_of(&self, idx: usize) -> NodeId {
        self.ids[idx]
    }

    /// Successor dense indices of a dense index, ascending.
    pub fn out_neighbors_idx(&self, idx: usize) -> &[usize] {
        &self.targets[self.offsets[idx]..self.offsets[idx + 1]]
    }

    /// Successors of `a` as external ids, sorted ascending; empty for sinks.
    pub fn out_neighbors(&self, a: NodeId) -> Result<Vec<NodeId>> {
        let idx = self.index_of(a)?;
        Ok(self
            .out_neighbors_idx(idx)
            .iter()
            .map(|&t| self.ids[t])
            .collect())
    }

    pub fn out_degree_idx(&self, idx: usize) -> usize {
        self.offsets[idx + 1] - self.offsets[idx]
    }

    /// All arcs as external id pairs, in (source, target) order.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count()).flat_map(move |a| {
            self.out_neighbors_idx(a)
                .iter()
                .map(move |&b| (self.ids[a], self.ids[b]))
        })
    }

    /// Attaches per-node ground-truth labels (dense-indexed).
    pub fn set_labels(&mut self, labels: Vec<u64>) -> Result<()> {
        if labels.len() != self.node_count() {
            return Err(Error::invalid(format!(
                "label count {} does not match node count {}",
                labels.len(),
                self.node_count()
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    pub fn labels(&self) -> Option<&[u64]> {
        self.labels.as_deref()
    }

    /// Writes the graph back out as one `from<TAB>to` arc per line.
    /// Reloading the output in directed mode reproduces the graph.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (a, b) in self.arcs() {
            writeln!(out, "{a}\t{b}")?;
        }
        Ok(())
    }

    /// Weakly connected components as sorted dense-index groups, ordered by
    /// smallest member.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        // reverse adjacency, needed to walk arcs against their direction
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for a in 0..n {
            for &b in self.out_neighbors_idx(a) {
                rev[b].push(a);
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut components = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let c = components.len();
            let mut members = vec![start];
            comp[start] = c;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in self.out_neighbors_idx(v).iter().chain(rev[v].iter()) {
                    if comp[w] == usize::MAX {
                        comp[w] = c;
                        members.push(w);
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    /// Subgraph induced by the given dense indices, preserving external ids.
    pub fn subgraph(&self, members: &[usize]) -> Graph {
        let keep: std::collections::HashSet<usize> = members.iter().copied().collect();
        let arcs: Vec<(NodeId, NodeId)> = members
            .iter()
            .flat_map(|&a| {
                self.out_neighbors_idx(a)
                    .iter()
                    .filter(|b| keep.contains(b))
                    .map(move |&b| (self.ids[a], self.ids[b]))
            })
            .collect();
        let mut g = Graph::from_arcs(arcs, EdgeMode::Directed);
        // isolated members never show up in arcs; re-add them
        if g.node_count() < members.len() {
            let mut ids: Vec<NodeId> = members.iter().map(|&i| self.ids[i]).collect();
            ids.sort_unstable();
            g = Graph::from_arcs_with_nodes(g.arcs().collect(), ids);
        }
        g
    }

    /// Builds a graph from directed arcs plus an explicit node set (covers
    /// isolated nodes that appear in no arc).
    pub fn from_arcs_with_nodes(arcs: Vec<(NodeId, NodeId)>, mut nodes: Vec<NodeId>) -> Graph {
        nodes.sort_unstable();
        nodes.dedup();
        let base = Graph::from_arcs(arcs, EdgeMode::Directed);
        if base.node_count() == nodes.len() {
            return base;
        }
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let n = nodes.len();
        let mut pairs: Vec<(usize, usize)> = base
            .arcs()
            .map(|(a, b)| (index[&a], index[&b]))
            .collect();
        pairs.sort_unstable();
        let mut offsets = vec![0usize; n + 1];
        for &(a, _) in &pairs {
            offsets[a + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.into_iter().map(|(_, b)| b).collect();
        Graph {
            ids: nodes,
            index,
            offsets,
            targets,
            labels: None,
        }
    }
}

/// Summary statistics for a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub n: usize,
    pub m: usize,
    pub min_out_degree: usize,
    pub max_out_degree: usize,
    pub mean_out_degree: f64,
    pub sink_count: usize,
}

/// Deterministic degree summary; all zeros for the empty graph.
pub fn graph_stats(g: &Graph) -> GraphStats {
    let n = g.node_count();
    if n == 0 {
        return GraphStats {
            n: 0,
            m: 0,
            min_out_degree: 0,
            max_out_degree: 0,
            mean_out_degree: 0.0,
            sink_count: 0,
        };
    }
    let degrees: Vec<usize> = (0..n).map(|i| g.out_degree_idx(i)).collect();
    GraphStats {
        n,
        m: g.arc_count(),
        min_out_degree: degrees.iter().copied().min().unwrap(),
        max_out_degree: degrees.iter().copied().max().unwrap(),
        mean_out_degree: g.arc_count() as f64 / n as f64,
        sink_count: degrees.iter().filter(|&&d| d == 0).count(),
    }
}

/// Opens a data file, transparently decoding `.gz` sources.
pub fn open_source(path: &std::path::Path) -> Result<Box<dyn Read>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(flate2::read::GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

/// Parses a SNAP edge list: `#`-prefixed comment lines, then one
/// `from<ws>to` pair per line. An empty stream yields an empty graph.
pub fn load_edge_list<R: Read>(source: R, mode: EdgeMode) -> Result<Graph> {
    let reader = BufReader::new(source);
    let mut arcs: Vec<(NodeId, NodeId)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let a = parse_node(tokens.next(), lineno)?;
        let b = parse_node(tokens.next(), lineno)?;
        if let Some(extra) = tokens.next() {
            return Err(Error::parse(
                lineno,
                format!("expected two node ids, found extra token {extra:?}"),
            ));
        }
        arcs.push((a, b));
    }
    Ok(Graph::from_arcs(arcs, mode))
}

fn parse_node(token: Option<&str>, lineno: usize) -> Result<NodeId> {
    let token =
        token.ok_or_else(|| Error::parse(lineno, "expected two node ids, found fewer"))?;
    token
        .parse::<NodeId>()
        .map_err(|_| Error::parse(lineno, format!("non-integer node id {token:?}")))
}

/// Ground-truth communities: one node-id set per input line. Membership may
/// overlap across lines.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthCommunities {
    communities: Vec<Vec<NodeId>>,
}

impl GroundTruthCommunities {
    pub fn count(&self) -> usize {
        self.communities.len()
    }

    pub fn communities(&self) -> &[Vec<NodeId>] {
        &self.communities
    }
}

/// Parses a SNAP community file: one community per non-empty line,
/// whitespace-separated node ids. Ids repeated on one line are collapsed.
pub fn load_ground_truth<R: Read>(source: R) -> Result<GroundTruthCommunities> {
    let reader = BufReader::new(source);
    let mut communities = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut members = Vec::new();
        for token in line.split_whitespace() {
            let id = token
                .parse::<NodeId>()
                .map_err(|_| Error::parse(lineno, format!("non-integer node id {token:?}")))?;
            members.push(id);
        }
        members.sort_unstable();
        members.dedup();
        communities.push(members);
    }
    Ok(GroundTruthCommunities { communities })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        load_edge_list("0 1\n1 2\n2 0\n".as_bytes(), EdgeMode::Undirected).unwrap()
    }

    #[test]
    fn triangle_expansion() {
        let g = triangle();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.arc_count(), 6);
    }

    #[test]
    fn empty_stream_is_empty_graph() {
        let g = load_edge_list("".as_bytes(), EdgeMode::Directed).unwrap();
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.arc_count(), 0);
        let stats = graph_stats(&g);
        assert_eq!(stats.n, 0);
        assert_eq!(stats.m, 0);
        assert_eq!(stats.mean_out_degree, 0.0);
        assert_eq!(stats.sink_count, 0);
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let g = load_edge_list(
            "# header\n\n0 1\n# trailing\n1 2\n".as_bytes(),
            EdgeMode::Directed,
        )
        .unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.arc_count(), 2);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let err = load_edge_list("0 1\nx 2\n".as_bytes(), EdgeMode::Directed).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
        let err = load_edge_list("0 1\n2\n".as_bytes(), EdgeMode::Directed).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
        let err = load_edge_list("0 1 2\n".as_bytes(), EdgeMode::Directed).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn self_loops_dropped_nodes_kept() {
        let g = load_edge_list("0 0\n0 1\n".as_bytes(), EdgeMode::Directed).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.arc_count(), 1);
    }

    #[test]
    fn duplicate_edges_deduplicated() {
        let g = load_edge_list("0 1\n0 1\n".as_bytes(), EdgeMode::Undirected).unwrap();
        assert_eq!(g.out_neighbors(0).unwrap(), vec![1]);
        assert_eq!(g.arc_count(), 2);
    }

    #[test]
    fn out_neighbors_sorted_and_sink_empty() {
        let g = triangle();
        assert_eq!(g.out_neighbors(0).unwrap(), vec![1, 2]);
        let d = load_edge_list("0 1\n".as_bytes(), EdgeMode::Directed).unwrap();
        assert_eq!(d.out_neighbors(1).unwrap(), Vec::<NodeId>::new());
        assert!(matches!(d.out_neighbors(7), Err(Error::UnknownNode(7))));
    }

    #[test]
    fn noncontiguous_ids_reindexed() {
        let g = load_edge_list("10 500\n500 9999\n".as_bytes(), EdgeMode::Directed).unwrap();
        assert_eq!(g.node_ids(), &[10, 500, 9999]);
        assert_eq!(g.index_of(500).unwrap(), 1);
        assert_eq!(g.out_neighbors(10).unwrap(), vec![500]);
    }

    #[test]
    fn triangle_stats() {
        let stats = graph_stats(&triangle());
        assert_eq!(stats.mean_out_degree, 2.0);
        assert_eq!(stats.min_out_degree, 2);
        assert_eq!(stats.max_out_degree, 2);
        assert_eq!(stats.sink_count, 0);
    }

    #[test]
    fn undirected_symmetry() {
        let g = load_edge_list("0 1\n1 2\n3 1\n".as_bytes(), EdgeMode::Undirected).unwrap();
        for &a in g.node_ids() {
            for &b in g.node_ids() {
                let fwd = g.out_neighbors(a).unwrap().contains(&b);
                let bwd = g.out_neighbors(b).unwrap().contains(&a);
                assert_eq!(fwd, bwd, "asymmetry between {a} and {b}");
            }
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let g = load_edge_list("0 1\n1 2\n2 0\n5 1\n".as_bytes(), EdgeMode::Undirected).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let reloaded = load_edge_list(buf.as_slice(), EdgeMode::Directed).unwrap();
        assert_eq!(g, reloaded);
    }

    #[test]
    fn ground_truth_basic() {
        let gt = load_ground_truth("0 1 2\n".as_bytes()).unwrap();
        assert_eq!(gt.count(), 1);
        assert_eq!(gt.communities()[0], vec![0, 1, 2]);
    }

    #[test]
    fn ground_truth_overlap_preserved() {
        let gt = load_ground_truth("0 1\n1 2\n".as_bytes()).unwrap();
        assert_eq!(gt.count(), 2);
        assert!(gt.communities()[0].contains(&1));
        assert!(gt.communities()[1].contains(&1));
    }

    #[test]
    fn ground_truth_counts_nonempty_lines() {
        let gt = load_ground_truth("0 1\n\n2 3\n  \n4\n".as_bytes()).unwrap();
        assert_eq!(gt.count(), 3);
    }

    #[test]
    fn ground_truth_parse_error() {
        let err = load_ground_truth("0 1\n2 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn labels_attach_per_node() {
        let mut g = triangle();
        assert!(g.labels().is_none());
        assert!(g.set_labels(vec![7, 7]).is_err());
        g.set_labels(vec![7, 7, 9]).unwrap();
        assert_eq!(g.labels(), Some(&[7, 7, 9][..]));
    }

    #[test]
    fn weak_components_split() {
        let g = load_edge_list("0 1\n2 3\n".as_bytes(), EdgeMode::Directed).unwrap();
        let comps = g.weak_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0], vec![0, 1]);
        assert_eq!(comps[1], vec![2, 3]);
    }

    #[test]
    fn subgraph_preserves_ids() {
        let g = load_edge_list("0 1\n1 2\n2 0\n7 8\n".as_bytes(), EdgeMode::Undirected).unwrap();
        let comps = g.weak_components();
        let sub = g.subgraph(&comps[1]);
        assert_eq!(sub.node_ids(), &[7, 8]);
        assert_eq!(sub.arc_count(), 2);
    }
}
