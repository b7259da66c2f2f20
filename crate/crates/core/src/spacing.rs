//! Feature-spacing similarity: min-max normalized access values.
//!
//! For every ordered pair the access value H(a,b) is computed from bounded
//! walk counts, then the off-diagonal pool is rescaled so its minimum maps
//! to 0 and its maximum to 1. A constant pool carries no discriminative
//! information; such matrices come back all-zero with a degeneracy flag.
//!
//! Rows are independent given the immutable graph, so sources are processed
//! by parallel workers; the min/max reduction runs over the collected rows
//! in index order, which keeps results identical for any worker count.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::walks::{walk_counts_from, WeightScheme};

/// Square similarity matrix over all ordered node pairs. Diagonal entries
/// are fixed at 0 and excluded from the normalization pool.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpacingMatrix {
    nodes: Vec<NodeId>,
    /// Row-major n x n normalized values.
    values: Vec<f64>,
    h_min: f64,
    h_max: f64,
    degenerate: bool,
    symmetrized: bool,
}

impl FeatureSpacingMatrix {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Node ids in row/column order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Normalized similarity by dense index.
    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.nodes.len() + b]
    }

    /// Normalized similarity by external node id.
    pub fn value_by_id(&self, a: NodeId, b: NodeId) -> Result<f64> {
        let ai = self.node_index(a)?;
        let bi = self.node_index(b)?;
        Ok(self.value(ai, bi))
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.values[a * self.nodes.len()..(a + 1) * self.nodes.len()]
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// True when every off-diagonal access value was equal and the matrix
    /// collapsed to all zeros.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    fn node_index(&self, id: NodeId) -> Result<usize> {
        self.nodes.binary_search(&id).map_err(|_| Error::UnknownNode(id))
    }

    pub fn metadata(&self, ws: &WeightScheme) -> SpacingMetadata {
        SpacingMetadata {
            p_max: ws.p_max(),
            weights: ws.weights().to_vec(),
            h_min: self.h_min,
            h_max: self.h_max,
            degenerate: self.degenerate,
            symmetrized: self.symmetrized,
        }
    }
}

/// Sidecar record describing how a similarity export was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingMetadata {
    pub p_max: usize,
    pub weights: Vec<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub degenerate: bool,
    pub symmetrized: bool,
}

/// Raw access-value row for one source over all targets.
fn access_row(g: &Graph, src: usize, ws: &WeightScheme) -> Result<Vec<f64>> {
    let counts = walk_counts_from(g, src, ws.p_max())?;
    let n = g.node_count();
    let mut row = vec![0.0f64; n];
    for p in 1..=ws.p_max() {
        let lengths = &counts[p - 1];
        let total: f64 = lengths.iter().sum();
        if total == 0.0 {
            continue;
        }
        let w = ws.weight(p);
        for (b, &c) in lengths.iter().enumerate() {
            if c > 0.0 {
                row[b] += w * (c / total);
            }
        }
    }
    Ok(row)
}

/// Computes the full similarity matrix.
pub fn feature_spacing_matrix(g: &Graph, ws: &WeightScheme) -> Result<FeatureSpacingMatrix> {
    feature_spacing_matrix_opts(g, ws, false)
}

/// Full matrix with optional symmetrization (each ordered pair replaced by
/// the mean of the two directions before normalization).
pub fn feature_spacing_matrix_opts(
    g: &Graph,
    ws: &WeightScheme,
    symmetrize: bool,
) -> Result<FeatureSpacingMatrix> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::invalid(
            "feature spacing needs at least two nodes",
        ));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|src| access_row(g, src, ws))
        .collect::<Result<_>>()?;

    let mut values = vec![0.0f64; n * n];
    for (a, row) in rows.iter().enumerate() {
        for b in 0..n {
            if a == b {
                continue;
            }
            values[a * n + b] = if symmetrize {
                0.5 * (row[b] + rows[b][a])
            } else {
                row[b]
            };
        }
    }

    let (h_min, h_max) = off_diagonal_extremes(&values, n);
    let degenerate = h_max <= h_min;
    normalize_in_place(&mut values, n, h_min, h_max, degenerate);

    Ok(FeatureSpacingMatrix {
        nodes: g.node_ids().to_vec(),
        values,
        h_min,
        h_max,
        degenerate,
        symmetrized: symmetrize,
    })
}

fn off_diagonal_extremes(values: &[f64], n: usize) -> (f64, f64) {
    let mut h_min = f64::INFINITY;
    let mut h_max = f64::NEG_INFINITY;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let v = values[a * n + b];
            h_min = h_min.min(v);
            h_max = h_max.max(v);
        }
    }
    (h_min, h_max)
}

fn normalize_in_place(values: &mut [f64], n: usize, h_min: f64, h_max: f64, degenerate: bool) {
    let span = h_max - h_min;
    for a in 0..n {
        for b in 0..n {
            let v = &mut values[a * n + b];
            if a == b || degenerate {
                *v = 0.0;
            } else {
                *v = (*v - h_min) / span;
            }
        }
    }
}

/// Per-node similarity rows restricted to landmark columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkMatrix {
    nodes: Vec<NodeId>,
    landmarks: Vec<NodeId>,
    /// Row-major n x L normalized values.
    values: Vec<f64>,
    h_min: f64,
    h_max: f64,
    degenerate: bool,
    symmetrized: bool,
}

impl LandmarkMatrix {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn landmark_count(&self) -> usize {
        self.landmarks.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn landmarks(&self) -> &[NodeId] {
        &self.landmarks
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let l = self.landmarks.len();
        &self.values[a * l..(a + 1) * l]
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn metadata(&self, ws: &WeightScheme) -> SpacingMetadata {
        SpacingMetadata {
            p_max: ws.p_max(),
            weights: ws.weights().to_vec(),
            h_min: self.h_min,
            h_max: self.h_max,
            degenerate: self.degenerate,
            symmetrized: self.symmetrized,
        }
    }
}

/// Computes per-node rows of access values to the given landmarks, min-max
/// normalized over the computed entries only. Entries pairing a node with
/// itself stay 0 and are excluded from the pool.
pub fn feature_spacing_to_landmarks(
    g: &Graph,
    ws: &WeightScheme,
    landmarks: &[NodeId],
) -> Result<LandmarkMatrix> {
    feature_spacing_to_landmarks_opts(g, ws, landmarks, false)
}

pub fn feature_spacing_to_landmarks_opts(
    g: &Graph,
    ws: &WeightScheme,
    landmarks: &[NodeId],
    symmetrize: bool,
) -> Result<LandmarkMatrix> {
    if landmarks.is_empty() {
        return Err(Error::invalid("landmark set must not be empty"));
    }
    let n = g.node_count();
    if n < 2 {
        return Err(Error::invalid(
            "feature spacing needs at least two nodes",
        ));
    }
    let mut landmark_idx = Vec::with_capacity(landmarks.len());
    for &l in landmarks {
        landmark_idx.push(g.index_of(l)?);
    }
    let is_landmark: std::collections::HashSet<usize> = landmark_idx.iter().copied().collect();

    // one DP per source, keeping only the landmark columns; landmark
    // sources keep their full row so the reverse direction is available
    // for symmetrization
    let per_source: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..n)
        .into_par_iter()
        .map(|src| {
            let row = access_row(g, src, ws)?;
            let extracted: Vec<f64> = landmark_idx.iter().map(|&lm| row[lm]).collect();
            let full = is_landmark.contains(&src).then_some(row);
            Ok((extracted, full))
        })
        .collect::<Result<_>>()?;
    let reverse: HashMap<usize, &Vec<f64>> = landmark_idx
        .iter()
        .map(|&lm| (lm, per_source[lm].1.as_ref().expect("landmark keeps its row")))
        .collect();

    let l = landmark_idx.len();
    let mut values = vec![0.0f64; n * l];
    let mut h_min = f64::INFINITY;
    let mut h_max = f64::NEG_INFINITY;
    for a in 0..n {
        for (j, &lm) in landmark_idx.iter().enumerate() {
            if a == lm {
                continue;
            }
            let v = if symmetrize {
                0.5 * (per_source[a].0[j] + reverse[&lm][a])
            } else {
                per_source[a].0[j]
            };
            values[a * l + j] = v;
            h_min = h_min.min(v);
            h_max = h_max.max(v);
        }
    }
    if !h_min.is_finite() {
        // every computed cell was a node/landmark self-pair
        h_min = 0.0;
        h_max = 0.0;
    }
    let degenerate = h_max <= h_min;
    let span = h_max - h_min;
    for a in 0..n {
        for (j, &lm) in landmark_idx.iter().enumerate() {
            let v = &mut values[a * l + j];
            if a == lm || degenerate {
                *v = 0.0;
            } else {
                *v = (*v - h_min) / span;
            }
        }
    }

    Ok(LandmarkMatrix {
        nodes: g.node_ids().to_vec(),
        landmarks: landmarks.to_vec(),
        values,
        h_min,
        h_max,
        degenerate,
        symmetrized: symmetrize,
    })
}

/// Writes `source,target,feature_spacing` rows for every ordered pair.
pub fn write_matrix_csv<W: Write>(m: &FeatureSpacingMatrix, mut out: W) -> Result<()> {
    writeln!(out, "source,target,feature_spacing")?;
    let n = m.n();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            writeln!(out, "{},{},{}", m.nodes[a], m.nodes[b], m.value(a, b))?;
        }
    }
    Ok(())
}

/// Writes `source,target,feature_spacing` rows for every node/landmark pair.
pub fn write_landmarks_csv<W: Write>(m: &LandmarkMatrix, mut out: W) -> Result<()> {
    writeln!(out, "source,target,feature_spacing")?;
    for a in 0..m.n() {
        let row = m.row(a);
        for (j, &lm) in m.landmarks.iter().enumerate() {
            if m.nodes[a] == lm {
                continue;
            }
            writeln!(out, "{},{},{}", m.nodes[a], lm, row[j])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_edge_list, EdgeMode};
    use crate::walks::default_weights;

    fn triangle() -> Graph {
        load_edge_list("0 1\n1 2\n2 0\n".as_bytes(), EdgeMode::Undirected).unwrap()
    }

    fn path3() -> Graph {
        load_edge_list("0 1\n1 2\n".as_bytes(), EdgeMode::Undirected).unwrap()
    }

    #[test]
    fn triangle_is_degenerate() {
        let g = triangle();
        let ws = default_weights(2).unwrap();
        let m = feature_spacing_matrix(&g, &ws).unwrap();
        assert!(m.is_degenerate());
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(m.value(a, b), 0.0);
            }
        }
    }

    #[test]
    fn path3_normalization_endpoints() {
        // access values on the 3-node path under halving weights:
        //   H(0,1) = H(2,1) = 0.5      (single length-1 walk, none of length 2 end at 1)
        //   H(1,0) = H(1,2) = 0.25     (one of two length-1 walks)
        //   H(0,2) = H(2,0) = 0.125    (one of two length-2 walks)
        let g = path3();
        let ws = default_weights(2).unwrap();
        let m = feature_spacing_matrix(&g, &ws).unwrap();
        assert!(!m.is_degenerate());
        assert!((m.h_min() - 0.125).abs() < 1e-15);
        assert!((m.h_max() - 0.5).abs() < 1e-15);
        assert_eq!(m.value_by_id(0, 2).unwrap(), 0.0);
        assert_eq!(m.value_by_id(2, 0).unwrap(), 0.0);
        assert_eq!(m.value_by_id(0, 1).unwrap(), 1.0);
        assert_eq!(m.value_by_id(2, 1).unwrap(), 1.0);
        let mid = m.value_by_id(1, 0).unwrap();
        assert!((mid - (0.25 - 0.125) / (0.5 - 0.125)).abs() < 1e-15);
    }

    #[test]
    fn values_in_unit_interval_with_attained_endpoints() {
        let g = load_edge_list(
            "0 1\n1 2\n2 3\n3 0\n0 2\n4 0\n".as_bytes(),
            EdgeMode::Undirected,
        )
        .unwrap();
        let ws = default_weights(3).unwrap();
        let m = feature_spacing_matrix(&g, &ws).unwrap();
        assert!(!m.is_degenerate());
        let n = m.n();
        let mut saw_zero = false;
        let mut saw_one = false;
        for a in 0..n {
            for b in 0..n {
                let v = m.value(a, b);
                assert!((0.0..=1.0).contains(&v));
                if a != b {
                    saw_zero |= v == 0.0;
                    saw_one |= v == 1.0;
                }
            }
        }
        assert!(saw_zero && saw_one);
    }

    #[test]
    fn diagonal_is_zero() {
        let g = path3();
        let ws = default_weights(2).unwrap();
        let m = feature_spacing_matrix(&g, &ws).unwrap();
        for a in 0..3 {
            assert_eq!(m.value(a, a), 0.0);
        }
    }

    #[test]
    fn needs_two_nodes() {
        let g = load_edge_list("".as_bytes(), EdgeMode::Directed).unwrap();
        let ws = default_weights(2).unwrap();
        assert!(feature_spacing_matrix(&g, &ws).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let g = load_edge_list(
            "0 1\n1 2\n2 3\n3 4\n4 0\n1 3\n".as_bytes(),
            EdgeMode::Undirected,
        )
        .unwrap();
        let ws = default_weights(4).unwrap();
        let a = feature_spacing_matrix(&g, &ws).unwrap();
        let b = feature_spacing_matrix(&g, &ws).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn landmarks_equal_full_matrix_when_all_nodes() {
        let g = load_edge_list(
            "0 1\n1 2\n2 3\n3 0\n".as_bytes(),
            EdgeMode::Undirected,
        )
        .unwrap();
        let ws = default_weights(2).unwrap();
        let full = feature_spacing_matrix(&g, &ws).unwrap();
        let lm = feature_spacing_to_landmarks(&g, &ws, g.node_ids()).unwrap();
        for a in 0..g.node_count() {
            assert_eq!(full.row(a), lm.row(a));
        }
        assert_eq!(full.h_min(), lm.h_min());
        assert_eq!(full.h_max(), lm.h_max());
    }

    #[test]
    fn single_landmark_constant_column_degenerates() {
        // both outer nodes of the path see the center identically
        let g = load_edge_list("0 1\n1 2\n0 2\n".as_bytes(), EdgeMode::Undirected).unwrap();
        let ws = default_weights(1).unwrap();
        let lm = feature_spacing_to_landmarks(&g, &ws, &[1]).unwrap();
        assert!(lm.is_degenerate());
        for a in 0..3 {
            assert_eq!(lm.row(a), &[0.0]);
        }
    }

    #[test]
    fn empty_landmarks_rejected() {
        let g = path3();
        let ws = default_weights(2).unwrap();
        assert!(feature_spacing_to_landmarks(&g, &ws, &[]).is_err());
    }

    #[test]
    fn symmetrized_pairs_agree() {
        let g = load_edge_list("0 1\n1 2\n2 0\n2 3\n".as_bytes(), EdgeMode::Directed).unwrap();
        let ws = default_weights(3).unwrap();
        let m = feature_spacing_matrix_opts(&g, &ws, true).unwrap();
        for a in 0..m.n() {
            for b in 0..m.n() {
                assert_eq!(m.value(a, b), m.value(b, a));
            }
        }
    }

    #[test]
    fn csv_export_shape() {
        let g = path3();
        let ws = default_weights(2).unwrap();
        let m = feature_spacing_matrix(&g, &ws).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "source,target,feature_spacing");
        assert_eq!(lines.count(), 6);
    }
}
