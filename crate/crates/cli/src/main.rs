//! Command-line entry point for the commscape toolkit.
//!
//! One binary, subcommand per pipeline stage. All randomness flows from
//! `--seed`; machine output goes only to declared files or stdout, logging
//! to stderr. Reports never carry timestamps, so identical inputs produce
//! byte-identical reports at any `--threads` setting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commscape::graph::{graph_stats, load_edge_list, load_ground_truth, open_source, EdgeMode, Graph};
use commscape::kmeans::{
    default_width, lloyd_kmeans, pruned_kmeans, read_points_csv, seed_centroids, KmeansRun,
};
use commscape::pipeline::{
    community_count_error, detect_communities, evaluate_batch, load_manifest, reference,
    stratified_landmarks, validate_partition, DetectConfig,
};
use commscape::quality::{
    cluster_customers, feature_impact, load_customers, synth_customers, write_customers_csv,
    Feature, SynthSpec, FEATURE_COUNT,
};
use commscape::spacing::{
    feature_spacing_matrix_opts, feature_spacing_to_landmarks_opts, write_landmarks_csv,
    write_matrix_csv,
};
use commscape::walks::default_weights;

#[derive(Parser)]
#[command(name = "commscape", version, about = "Community detection and customer quality scoring over SNAP-format graphs")]
struct Cli {
    /// Worker threads; falls back to COMMSCAPE_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with default parameter values; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize an edge list (nodes, arcs, degree spread, sinks).
    Stats(StatsArgs),
    /// Export the feature-spacing similarity matrix as CSV.
    Similarity(SimilarityArgs),
    /// Cluster a CSV point set with pruned or plain k-means.
    Cluster(ClusterArgs),
    /// Detect communities in a graph and report the partition.
    Detect(DetectArgs),
    /// Run the detection pipeline over a dataset manifest.
    Evaluate(EvaluateArgs),
    /// Cluster customers and score per-feature impact.
    Quality(QualityArgs),
    /// Generate synthetic customers with planted clusters.
    Synth(SynthArgs),
}

#[derive(Args)]
struct StatsArgs {
    /// Edge-list file (plain or .gz).
    #[arg(long)]
    edges: PathBuf,
    /// Treat edges as directed arcs instead of expanding both ways.
    #[arg(long)]
    directed: bool,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimilarityArgs {
    /// Edge-list file (plain or .gz).
    #[arg(long)]
    edges: PathBuf,
    /// Treat edges as directed arcs instead of expanding both ways.
    #[arg(long)]
    directed: bool,
    /// Maximum walk length [default: min(4, max(1, n-2))].
    #[arg(long)]
    p: Option<usize>,
    /// Restrict columns to this many degree-stratified landmarks
    /// [default: full matrix].
    #[arg(long)]
    landmarks: Option<usize>,
    /// Average the two directions of each pair before normalizing.
    #[arg(long)]
    symmetrize: bool,
    /// Seed for landmark sampling [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Metadata sidecar destination (default: <output>.meta.json).
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Point-set CSV (optional header, optional id column).
    #[arg(long)]
    points: PathBuf,
    /// Cluster count.
    #[arg(long)]
    k: usize,
    /// Seed for centroid initialization [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Pruning interval width [default: bbox diagonal / (16 k)].
    #[arg(long)]
    width: Option<f64>,
    /// Use plain Lloyd iteration instead of the pruned variant.
    #[arg(long)]
    lloyd: bool,
    /// Iteration cap [default: 100].
    #[arg(long)]
    max_iter: Option<usize>,
    /// Run report destination (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-point labels CSV.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Edge-list file (plain or .gz).
    #[arg(long)]
    edges: PathBuf,
    /// Ground-truth community file; enables the count-error column.
    #[arg(long)]
    communities: Option<PathBuf>,
    /// Treat edges as directed arcs instead of expanding both ways.
    #[arg(long)]
    directed: bool,
    /// Fixed community count.
    #[arg(long, conflicts_with = "auto_k")]
    k: Option<usize>,
    /// Select the community count automatically (the default).
    #[arg(long)]
    auto_k: bool,
    /// Maximum walk length [default: min(4, max(1, n-2))].
    #[arg(long)]
    p: Option<usize>,
    /// Landmark column count [default: min(n, 128)].
    #[arg(long)]
    landmarks: Option<usize>,
    /// Split penalty multiplier for automatic selection
    /// [default: 3 / embedding dimension].
    #[arg(long)]
    lambda: Option<f64>,
    /// Pruning interval width [default: bbox diagonal / (16 k)].
    #[arg(long)]
    width: Option<f64>,
    /// Seed for all randomness [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration cap per clustering run [default: 100].
    #[arg(long)]
    max_iter: Option<usize>,
    /// Bisection depth cap [default: 32].
    #[arg(long)]
    max_depth: Option<usize>,
    /// Average the two directions of the similarity before normalizing.
    #[arg(long)]
    symmetrize: bool,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Node-to-community CSV.
    #[arg(long)]
    assignments: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// JSON manifest of datasets to run.
    #[arg(long, required_unless_present = "reference", conflicts_with = "reference")]
    manifest: Option<PathBuf>,
    /// Evaluate the bundled reference counts instead of running datasets.
    #[arg(long)]
    reference: bool,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Table-shaped CSV destination.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Bar-chart data CSV destination.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct QualityArgs {
    /// Customer CSV with a customer_id column plus feature columns.
    #[arg(long)]
    customers: PathBuf,
    /// Cluster count, at least 2 for impact scoring [default: 2].
    #[arg(long)]
    k: Option<usize>,
    /// Seed for centroid initialization [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Bar-chart data CSV destination.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Customer CSV destination.
    #[arg(long)]
    out: PathBuf,
    /// Number of customers to generate.
    #[arg(long)]
    n: usize,
    /// Planted cluster count [default: 2].
    #[arg(long)]
    clusters: Option<usize>,
    /// Generator seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Gaussian noise on every cell [default: 1].
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Per-feature mean gaps: one value for all twelve, or twelve
    /// comma-separated values.
    #[arg(long)]
    separations: Option<String>,
    /// Planted labels CSV destination.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

/// Optional defaults loaded from `--config`; any explicit flag wins.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    p_max: Option<usize>,
    landmarks: Option<usize>,
    lambda: Option<f64>,
    width: Option<f64>,
    seed: Option<u64>,
    threads: Option<usize>,
    max_iter: Option<usize>,
    max_depth: Option<usize>,
    k: Option<usize>,
    clusters: Option<usize>,
    noise_sd: Option<f64>,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<commscape::Error> for Failure {
    fn from(e: commscape::Error) -> Failure {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
            serde_json::from_reader(file)
                .map_err(|e: serde_json::Error| {
                    Failure::Usage(format!("--config {}: {e}", path.display()))
                })?
        }
        None => ConfigFile::default(),
    };

    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("COMMSCAPE_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .or(config.threads);
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        // ignore the error when a pool already exists (e.g. under tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    match cli.command {
        Command::Stats(args) => cmd_stats(args),
        Command::Similarity(args) => cmd_similarity(args, &config),
        Command::Cluster(args) => cmd_cluster(args, &config),
        Command::Detect(args) => cmd_detect(args, &config),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Quality(args) => cmd_quality(args, &config),
        Command::Synth(args) => cmd_synth(args, &config),
    }
}

fn mode_of(directed: bool) -> EdgeMode {
    if directed {
        EdgeMode::Directed
    } else {
        EdgeMode::Undirected
    }
}

fn load_graph(path: &Path, directed: bool) -> Result<Graph, Failure> {
    let g = load_edge_list(open_source(path)?, mode_of(directed))?;
    eprintln!(
        "loaded {}: {} nodes, {} arcs",
        path.display(),
        g.node_count(),
        g.arc_count()
    );
    Ok(g)
}

/// Writes a JSON report to the given path, or stdout when none is given.
fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let rendered = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Data(format!("serializing report: {e}")))?;
    match path {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            out.write_all(rendered.as_bytes())?;
            out.write_all(b"\n")?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{rendered}"),
    }
    Ok(())
}

fn create_out(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_stats(args: StatsArgs) -> Result<(), Failure> {
    let g = load_graph(&args.edges, args.directed)?;
    let stats = graph_stats(&g);
    emit_json(&stats, args.output.as_deref())
}

fn default_p_for(n: usize) -> usize {
    n.saturating_sub(2).clamp(1, 4)
}

fn cmd_similarity(args: SimilarityArgs, config: &ConfigFile) -> Result<(), Failure> {
    let g = load_graph(&args.edges, args.directed)?;
    let p = args
        .p
        .or(config.p_max)
        .unwrap_or_else(|| default_p_for(g.node_count()));
    let ws = default_weights(p)?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let landmarks = args.landmarks.or(config.landmarks);

    let metadata;
    let mut csv_bytes = Vec::new();
    match landmarks {
        Some(count) if count < g.node_count() => {
            let picks = stratified_landmarks(&g, count.max(1), seed);
            let m = feature_spacing_to_landmarks_opts(&g, &ws, &picks, args.symmetrize)?;
            metadata = m.metadata(&ws);
            write_landmarks_csv(&m, &mut csv_bytes)?;
        }
        _ => {
            let m = feature_spacing_matrix_opts(&g, &ws, args.symmetrize)?;
            metadata = m.metadata(&ws);
            write_matrix_csv(&m, &mut csv_bytes)?;
        }
    }

    match &args.output {
        Some(path) => {
            let mut out = create_out(path)?;
            out.write_all(&csv_bytes)?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(&csv_bytes)?,
    }

    let metadata_path = args.metadata.clone().or_else(|| {
        args.output
            .as_ref()
            .map(|p| PathBuf::from(format!("{}.meta.json", p.display())))
    });
    match metadata_path {
        Some(path) => emit_json(&metadata, Some(&path))?,
        None => eprintln!(
            "metadata: {}",
            serde_json::to_string(&metadata).map_err(|e| Failure::Data(e.to_string()))?
        ),
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterReport {
    config: ClusterConfigEcho,
    n_points: usize,
    dim: usize,
    iterations: usize,
    final_objective: f64,
    objective_per_iter: Vec<f64>,
    deviation_per_iter: Vec<f64>,
    visits_per_iter: Vec<usize>,
    cluster_sizes: Vec<usize>,
}

#[derive(Serialize)]
struct ClusterConfigEcho {
    k: usize,
    seed: u64,
    width: Option<f64>,
    engine: &'static str,
    max_iter: usize,
}

fn cmd_cluster(args: ClusterArgs, config: &ConfigFile) -> Result<(), Failure> {
    let ps = read_points_csv(open_source(&args.points)?)?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let max_iter = args.max_iter.or(config.max_iter).unwrap_or(100);
    let init = seed_centroids(&ps, args.k, seed)?;

    let use_lloyd = args.lloyd || args.k == 1;
    let (run, width_used): (KmeansRun, Option<f64>) = if use_lloyd {
        (lloyd_kmeans(&ps, &init, max_iter)?, None)
    } else {
        let width = args
            .width
            .or(config.width)
            .unwrap_or_else(|| default_width(&ps, args.k));
        (pruned_kmeans(&ps, &init, width, max_iter)?, Some(width))
    };

    let mut sizes = vec![0usize; args.k];
    for &l in &run.assignment.labels {
        sizes[l] += 1;
    }
    let report = ClusterReport {
        config: ClusterConfigEcho {
            k: args.k,
            seed,
            width: width_used,
            engine: if use_lloyd { "lloyd" } else { "pruned" },
            max_iter,
        },
        n_points: ps.len(),
        dim: ps.dim(),
        iterations: run.iterations,
        final_objective: run.assignment.objective,
        objective_per_iter: run.objective_per_iter.clone(),
        deviation_per_iter: run.deviation_per_iter.clone(),
        visits_per_iter: run.visits_per_iter.clone(),
        cluster_sizes: sizes,
    };

    if let Some(path) = &args.labels_out {
        let mut out = create_out(path)?;
        writeln!(out, "id,label")?;
        for (i, &l) in run.assignment.labels.iter().enumerate() {
            writeln!(out, "{},{}", ps.ids()[i], l)?;
        }
        eprintln!("wrote {}", path.display());
    }
    emit_json(&report, args.report.as_deref())
}

#[derive(Serialize)]
struct DetectReport {
    config: DetectConfig,
    /// Effective lambda is this constant over the embedding dimension
    /// whenever config.lambda is unset.
    adaptive_lambda_scale: f64,
    n: usize,
    m: usize,
    component_count: usize,
    found_count: usize,
    community_sizes: Vec<usize>,
    true_count: Option<usize>,
    count_error_pct: Option<f64>,
    partition_valid: bool,
}

fn cmd_detect(args: DetectArgs, config: &ConfigFile) -> Result<(), Failure> {
    let g = load_graph(&args.edges, args.directed)?;
    let detect_config = DetectConfig {
        k: args.k.or(if args.auto_k { None } else { config.k }),
        p_max: args.p.or(config.p_max),
        landmarks: args.landmarks.or(config.landmarks),
        lambda: args.lambda.or(config.lambda),
        width: args.width.or(config.width),
        max_iter: args.max_iter.or(config.max_iter).unwrap_or(100),
        seed: args.seed.or(config.seed).unwrap_or(0),
        max_depth: args.max_depth.or(config.max_depth).unwrap_or(32),
        symmetrize: args.symmetrize,
    };

    let detection = detect_communities(&g, &detect_config)?;
    let partition = &detection.partition;
    let partition_valid = validate_partition(partition, &g).is_ok();

    let true_count = match &args.communities {
        Some(path) => Some(load_ground_truth(open_source(path)?)?.count()),
        None => None,
    };
    let count_error_pct = match true_count {
        Some(t) => Some(community_count_error(t, partition.k_found())?),
        None => None,
    };

    if let Some(path) = &args.assignments {
        let mut out = create_out(path)?;
        writeln!(out, "node,community")?;
        for (ci, community) in partition.communities().iter().enumerate() {
            for &v in community {
                writeln!(out, "{v},{ci}")?;
            }
        }
        eprintln!("wrote {}", path.display());
    }

    let report = DetectReport {
        config: detect_config,
        adaptive_lambda_scale: commscape::pipeline::ADAPTIVE_LAMBDA_SCALE,
        n: g.node_count(),
        m: g.arc_count(),
        component_count: detection.component_count,
        found_count: partition.k_found(),
        community_sizes: partition.community_sizes(),
        true_count,
        count_error_pct,
        partition_valid,
    };
    emit_json(&report, args.output.as_deref())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let report = if args.reference {
        reference::reference_report()
    } else {
        let path = args.manifest.as_ref().expect("clap enforces presence");
        let specs = load_manifest(open_source(path)?)?;
        evaluate_batch(&specs)?
    };

    if let Some(path) = &args.csv {
        let mut out = create_out(path)?;
        report.write_csv(&mut out)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &args.plot_data {
        let mut out = create_out(path)?;
        report.write_plot_csv(&mut out)?;
        eprintln!("wrote {}", path.display());
    }
    emit_json(&report, args.report.as_deref())
}

#[derive(Serialize)]
struct QualityReport {
    config: QualityConfigEcho,
    n_customers: usize,
    active_features: Vec<&'static str>,
    absent_features: Vec<&'static str>,
    standardization: Vec<commscape::quality::FeatureScale>,
    impacts: Vec<commscape::quality::ImpactEntry>,
    ordering: Vec<&'static str>,
}

#[derive(Serialize)]
struct QualityConfigEcho {
    k: usize,
    seed: u64,
}

fn cmd_quality(args: QualityArgs, config: &ConfigFile) -> Result<(), Failure> {
    let set = load_customers(open_source(&args.customers)?)?;
    let k = args.k.or(config.k).unwrap_or(2);
    let seed = args.seed.or(config.seed).unwrap_or(0);

    let clustering = cluster_customers(&set, k, seed)?;
    let impact = feature_impact(&set, &clustering.assignment.labels)?;

    if let Some(path) = &args.plot_data {
        let mut out = create_out(path)?;
        impact.write_plot_csv(&mut out)?;
        eprintln!("wrote {}", path.display());
    }

    let report = QualityReport {
        config: QualityConfigEcho { k, seed },
        n_customers: set.len(),
        active_features: set.active_features().iter().map(|f| f.key()).collect(),
        absent_features: impact.absent().iter().map(|f| f.key()).collect(),
        standardization: clustering.standardization.clone(),
        impacts: impact.entries().to_vec(),
        ordering: impact.ordering(),
    };
    emit_json(&report, args.report.as_deref())
}

fn parse_separations(raw: Option<&str>) -> Result<[f64; FEATURE_COUNT], Failure> {
    let Some(raw) = raw else {
        return Ok([10.0; FEATURE_COUNT]);
    };
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let values: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Failure::Usage(format!("--separations: bad value {p:?}")))
        })
        .collect::<Result<_, _>>()?;
    match values.len() {
        1 => Ok([values[0]; FEATURE_COUNT]),
        FEATURE_COUNT => {
            let mut out = [0.0; FEATURE_COUNT];
            out.copy_from_slice(&values);
            Ok(out)
        }
        other => Err(Failure::Usage(format!(
            "--separations needs 1 or {FEATURE_COUNT} values, got {other}"
        ))),
    }
}

fn cmd_synth(args: SynthArgs, config: &ConfigFile) -> Result<(), Failure> {
    let spec = SynthSpec {
        clusters: args.clusters.or(config.clusters).unwrap_or(2),
        separations: parse_separations(args.separations.as_deref())?,
        noise_sd: args.noise_sd.or(config.noise_sd).unwrap_or(1.0),
    };
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let synth = synth_customers(seed, args.n, &spec)?;

    let mut out = create_out(&args.out)?;
    write_customers_csv(&synth.set, &mut out)?;
    eprintln!("wrote {}", args.out.display());

    if let Some(path) = &args.labels_out {
        let mut out = create_out(path)?;
        writeln!(out, "customer_id,planted")?;
        for (record, &label) in synth.set.records().iter().zip(&synth.planted) {
            writeln!(out, "{},{label}", record.customer_id)?;
        }
        eprintln!("wrote {}", path.display());
    }

    let separated: Vec<&str> = Feature::ALL
        .iter()
        .filter(|f| spec.separations[f.index()] > 0.0)
        .map(|f| f.key())
        .collect();
    eprintln!(
        "generated {} customers, {} planted clusters, separated features: {}",
        args.n,
        spec.clusters,
        separated.join(",")
    );
    Ok(())
}
