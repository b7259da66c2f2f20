//! Graph community detection built on bounded-length walk similarity,
//! interval-pruned k-means, and downstream customer quality scoring.
//!
//! The crate is organized around the stages of the detection pipeline:
//!
//! - [`graph`]: SNAP-format edge lists and ground-truth communities.
//! - [`walks`]: bounded-length walk counting and per-length transition
//!   probabilities.
//! - [`spacing`]: the feature-spacing similarity matrix (min-max normalized
//!   weighted access values) and its landmark variant.
//! - [`kmeans`]: Lloyd k-means and the interval-pruned variant that skips
//!   points whose nearest-center margin provably cannot have flipped.
//! - [`pipeline`]: node embedding, community detection with automatic
//!   cluster-count selection, partition validation, and batch evaluation.
//! - [`quality`]: clustering customers on the twelve quality features and
//!   scoring per-feature impact as variance explained.
//! - [`generate`]: seeded synthetic graphs for benchmarks and calibration.

pub mod error;
pub mod generate;
pub mod graph;
pub mod kmeans;
pub mod pipeline;
pub mod quality;
pub mod spacing;
pub mod walks;

pub use error::{Error, Result};
pub use graph::{Graph, GraphStats, GroundTruthCommunities, NodeId};
pub use kmeans::{Assignment, Centroids, KmeansRun, PointSet};
pub use pipeline::{DetectConfig, EvaluationReport, Partition};
pub use quality::{CustomerRecord, Feature, ImpactReport};
pub use spacing::FeatureSpacingMatrix;
pub use walks::{WalkInventory, WeightScheme};
