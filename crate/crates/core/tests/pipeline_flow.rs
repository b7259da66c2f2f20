//! Cross-module pipeline checks: detection output legality, the bisection
//! objective on a hand-checkable instance, and quality scoring end to end.

use commscape::generate::planted_partition;
use commscape::graph::{load_edge_list, EdgeMode};
use commscape::pipeline::{
    detect_communities, embed_nodes, evaluate_batch, validate_partition, DatasetSpec,
    DetectConfig,
};
use commscape::quality::{cluster_customers, feature_impact, synth_customers, SynthSpec};
use commscape::walks::default_weights;

fn five_clique_pair(bridge: bool) -> commscape::Graph {
    let mut text = String::new();
    for a in 0..5u64 {
        for b in (a + 1)..5 {
            text += &format!("{a} {b}\n");
        }
    }
    for a in 10..15u64 {
        for b in (a + 1)..15 {
            text += &format!("{a} {b}\n");
        }
    }
    if bridge {
        text += "4 10\n";
    }
    load_edge_list(text.as_bytes(), EdgeMode::Undirected).unwrap()
}

#[test]
fn bisection_objective_favors_the_two_way_split() {
    // Two 5-cliques: every within-clique pair normalizes to 1, every cross
    // pair to 0, so the SSEs are hand-computable. One cluster: each of the
    // 10 live coordinates holds four 1s and six 0s, SSE = 10 * 10 * 0.24 =
    // 24. Split by clique: each row differs from its clique mean (4/5 on 5
    // coordinates) only at its own diagonal zero, SSE = 2 * 5 * 0.8 = 8.
    let g = five_clique_pair(false);
    let ws = default_weights(4).unwrap();
    let ps = embed_nodes(&g, &ws, 10, 0).unwrap();
    let lambda = commscape::pipeline::ADAPTIVE_LAMBDA_SCALE / ps.dim() as f64;
    let penalty_per_cluster = lambda * ps.dim() as f64 * (ps.len() as f64).ln();

    let sse = |groups: &[Vec<usize>]| -> f64 {
        let mut total = 0.0;
        for group in groups {
            let d = ps.dim();
            let mut mean = vec![0.0; d];
            for &i in group {
                for (m, &v) in mean.iter_mut().zip(ps.row(i)) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= group.len() as f64;
            }
            for &i in group {
                for (m, &v) in mean.iter().zip(ps.row(i)) {
                    total += (v - m) * (v - m);
                }
            }
        }
        total
    };
    let whole: Vec<usize> = (0..10).collect();
    let split = [vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]];
    assert!((sse(std::slice::from_ref(&whole)) - 24.0).abs() < 1e-9);
    assert!((sse(&split) - 8.0).abs() < 1e-9);

    let cost = |groups: &[Vec<usize>]| sse(groups) + penalty_per_cluster * groups.len() as f64;
    let one_way = cost(&[whole]);
    let two_way = cost(&split);
    let three_way = cost(&[vec![0, 1, 2, 3, 4], vec![5, 6, 7], vec![8, 9]]);
    assert!(
        two_way < one_way && two_way < three_way,
        "two-way {two_way} vs one-way {one_way} vs three-way {three_way}"
    );

    // bridging the cliques removes the component shortcut, so recovering
    // both sides goes through the penalized objective itself
    for bridge in [false, true] {
        let g = five_clique_pair(bridge);
        let detection = detect_communities(&g, &DetectConfig::default()).unwrap();
        assert_eq!(detection.partition.k_found(), 2, "bridge = {bridge}");
        assert_eq!(detection.partition.communities()[0], vec![0, 1, 2, 3, 4]);
    }
}

#[test]
fn every_detection_is_a_legal_partition() {
    let fixtures: Vec<commscape::Graph> = vec![
        load_edge_list("0 1\n".as_bytes(), EdgeMode::Undirected).unwrap(),
        load_edge_list("0 1\n2 3\n4 5\n".as_bytes(), EdgeMode::Undirected).unwrap(),
        // isolated node 9 via dropped self-loop plus two components
        load_edge_list("0 1\n1 2\n5 6\n9 9\n".as_bytes(), EdgeMode::Undirected).unwrap(),
        load_edge_list("0 1\n1 2\n2 0\n0 3\n3 4\n4 5\n5 3\n".as_bytes(), EdgeMode::Undirected)
            .unwrap(),
        planted_partition(&[12, 12, 12], 0.85, 0.03, 5).unwrap().0,
    ];
    for (i, g) in fixtures.iter().enumerate() {
        for config in [
            DetectConfig::default(),
            DetectConfig {
                k: Some(2.min(g.node_count())),
                ..DetectConfig::default()
            },
        ] {
            let detection = detect_communities(g, &config).unwrap();
            assert!(
                validate_partition(&detection.partition, g).is_ok(),
                "fixture {i} produced an illegal partition"
            );
        }
    }
}

#[test]
fn evaluate_batch_runs_files_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("two_triangles.txt");
    let cmty = dir.path().join("two_triangles.cmty");
    std::fs::write(&edges, "0 1\n1 2\n2 0\n10 11\n11 12\n12 10\n").unwrap();
    std::fs::write(&cmty, "0 1 2\n10 11 12\n").unwrap();

    let specs = vec![DatasetSpec {
        name: "two-triangles".into(),
        edges,
        communities: Some(cmty),
        directed: false,
        p_max: None,
        landmarks: None,
        k: None,
        lambda: None,
        seed: Some(1),
        width: None,
        symmetrize: false,
    }];
    let report = evaluate_batch(&specs).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].true_count, Some(2));
    assert_eq!(report.rows[0].found_count, Some(2));
    assert_eq!(report.rows[0].error_pct, Some(0.0));
    assert_eq!(report.average_error_pct, Some(0.0));

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("name,true,found,error_pct\n"));
    assert!(text.contains("two-triangles,2,2,0.00"));

    let mut plot = Vec::new();
    report.write_plot_csv(&mut plot).unwrap();
    assert!(String::from_utf8(plot).unwrap().contains("two-triangles,2,2"));
}

#[test]
fn gzip_sources_load() {
    use std::io::Write;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edges.txt.gz");
    let file = std::fs::File::create(&path).unwrap();
    let mut encoder = flate2::write::GzEncoder::new(file, flate2::Compression::default());
    encoder.write_all(b"0 1\n1 2\n2 0\n").unwrap();
    encoder.finish().unwrap();

    let g = load_edge_list(
        commscape::graph::open_source(&path).unwrap(),
        EdgeMode::Undirected,
    )
    .unwrap();
    assert_eq!(g.node_count(), 3);
    assert_eq!(g.arc_count(), 6);
}

#[test]
fn quality_pipeline_end_to_end() {
    let spec = SynthSpec {
        clusters: 3,
        separations: [12.0; 12],
        noise_sd: 1.0,
    };
    let synth = synth_customers(5, 60, &spec).unwrap();
    let clustering = cluster_customers(&synth.set, 3, 9).unwrap();
    let report = feature_impact(&synth.set, &clustering.assignment.labels).unwrap();
    assert_eq!(report.entries().len(), 12);
    for e in report.entries() {
        assert!((0.0..=100.0).contains(&e.impact_pct));
    }
    let mut plot = Vec::new();
    report.write_plot_csv(&mut plot).unwrap();
    let text = String::from_utf8(plot).unwrap();
    assert!(text.starts_with("feature,name,impact_pct\n"));
    assert_eq!(text.lines().count(), 13);
}
