//! Property tests tying the DP walk engine to the queue-enumeration oracle
//! and pinning the probability and normalization invariants.

use proptest::prelude::*;

use commscape::graph::{EdgeMode, Graph};
use commscape::spacing::feature_spacing_matrix;
use commscape::walks::{
    access_value, default_weights, enumerate_walks, transition_probability, walk_count_dp,
};

fn arc_strategy(n: u64) -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((0..n, 0..n), 0..=(n * n) as usize)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_equals_enumeration(arcs in arc_strategy(7), directed in any::<bool>(), p_max in 1usize..=4) {
        let mode = if directed { EdgeMode::Directed } else { EdgeMode::Undirected };
        let g = Graph::from_arcs(arcs, mode);
        for &a in g.node_ids() {
            let slow = enumerate_walks(&g, a, p_max).unwrap();
            let fast = walk_count_dp(&g, a, p_max).unwrap();
            prop_assert_eq!(slow, fast);
        }
    }

    #[test]
    fn rows_are_stochastic(arcs in arc_strategy(7), p_max in 1usize..=4) {
        let g = Graph::from_arcs(arcs, EdgeMode::Undirected);
        for &a in g.node_ids() {
            let inv = walk_count_dp(&g, a, p_max).unwrap();
            for p in 1..=p_max {
                if inv.total(p).unwrap() > 0.0 {
                    let sum: f64 = g
                        .node_ids()
                        .iter()
                        .map(|&b| transition_probability(&inv, b, p).unwrap())
                        .sum();
                    prop_assert!((sum - 1.0).abs() < 1e-12, "sum {} at p {}", sum, p);
                }
            }
        }
    }

    #[test]
    fn truncation_is_monotone(arcs in arc_strategy(6), k in 1usize..=3) {
        // adding a weighted length can only add non-negative mass
        let g = Graph::from_arcs(arcs, EdgeMode::Undirected);
        let short = default_weights(k).unwrap();
        let long = default_weights(k + 1).unwrap();
        for &a in g.node_ids() {
            let inv = walk_count_dp(&g, a, k + 1).unwrap();
            for &b in g.node_ids() {
                let h_short = access_value(&inv, b, &short).unwrap();
                let h_long = access_value(&inv, b, &long).unwrap();
                prop_assert!(h_long >= h_short - 1e-15);
            }
        }
    }

    #[test]
    fn normalization_bounds_hold(arcs in arc_strategy(7), symmetrize in any::<bool>()) {
        let g = Graph::from_arcs(arcs, EdgeMode::Undirected);
        prop_assume!(g.node_count() >= 2);
        let ws = default_weights(3).unwrap();
        let m = commscape::spacing::feature_spacing_matrix_opts(&g, &ws, symmetrize).unwrap();
        let n = m.n();
        let mut saw_zero = false;
        let mut saw_one = false;
        for a in 0..n {
            for b in 0..n {
                let v = m.value(a, b);
                prop_assert!((0.0..=1.0).contains(&v), "value {} out of range", v);
                if a != b {
                    saw_zero |= v == 0.0;
                    saw_one |= v == 1.0;
                }
            }
        }
        if m.is_degenerate() {
            prop_assert!(!saw_one);
        } else {
            prop_assert!(saw_zero && saw_one);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_matches_enumeration_oracle(arcs in arc_strategy(7), p_max in 1usize..=4) {
        // rebuild the matrix from the queue enumerator: raw access values
        // for every ordered pair, then the same min-max normalization
        let g = Graph::from_arcs(arcs, EdgeMode::Undirected);
        prop_assume!(g.node_count() >= 2);
        let ws = default_weights(p_max).unwrap();
        let m = feature_spacing_matrix(&g, &ws).unwrap();

        let n = g.node_count();
        let mut raw = vec![0.0f64; n * n];
        let mut h_min = f64::INFINITY;
        let mut h_max = f64::NEG_INFINITY;
        for (ai, &a) in g.node_ids().iter().enumerate() {
            let inv = enumerate_walks(&g, a, p_max).unwrap();
            for (bi, &b) in g.node_ids().iter().enumerate() {
                if ai == bi {
                    continue;
                }
                let h = access_value(&inv, b, &ws).unwrap();
                raw[ai * n + bi] = h;
                h_min = h_min.min(h);
                h_max = h_max.max(h);
            }
        }
        prop_assert!((m.h_min() - h_min).abs() <= 1e-12);
        prop_assert!((m.h_max() - h_max).abs() <= 1e-12);
        for a in 0..n {
            for b in 0..n {
                let expected = if a == b || h_max <= h_min {
                    0.0
                } else {
                    (raw[a * n + b] - h_min) / (h_max - h_min)
                };
                prop_assert!(
                    (m.value(a, b) - expected).abs() <= 1e-12,
                    "pair ({}, {}): {} vs oracle {}",
                    a, b, m.value(a, b), expected
                );
            }
        }
    }
}

#[test]
fn embedding_rows_match_the_enumeration_oracle() {
    // full-coverage landmarks make the embedding the similarity matrix
    let g = Graph::from_arcs(
        vec![(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)],
        EdgeMode::Undirected,
    );
    let ws = default_weights(3).unwrap();
    let ps = commscape::pipeline::embed_nodes(&g, &ws, g.node_count(), 0).unwrap();
    let m = feature_spacing_matrix(&g, &ws).unwrap();
    for a in 0..g.node_count() {
        assert_eq!(ps.row(a), m.row(a));
    }
}

#[test]
fn matrices_are_bit_identical_across_runs() {
    let (g, _) = commscape::generate::planted_partition(&[9, 9, 9], 0.8, 0.05, 3).unwrap();
    let ws = default_weights(4).unwrap();
    let first = feature_spacing_matrix(&g, &ws).unwrap();
    for _ in 0..3 {
        assert_eq!(feature_spacing_matrix(&g, &ws).unwrap(), first);
    }
}
