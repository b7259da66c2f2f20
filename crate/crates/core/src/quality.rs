//! Customer quality scoring over the twelve quality features.
//!
//! Customers are clustered on z-scored feature columns; the impact of a
//! feature is then the percentage of its raw variance explained by the
//! clustering (between-cluster sum of squares over total sum of squares).
//! Impacts are per-feature percentages and intentionally do not sum to 100.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{
    default_width, lloyd_kmeans, pruned_kmeans, seed_centroids, Assignment, PointSet,
};

pub const FEATURE_COUNT: usize = 12;

/// The twelve customer quality features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    TotalDirectTransactions,
    ClickDirectTransactions,
    RegisterDirectTransactions,
    DirectPurchases,
    GuidanceDirectTransactions,
    IndirectTransactions,
    ActivityDays,
    SocialNetworkRole,
    SocialNetworkSize,
    FrequentVisits,
    VariousVisits,
    ConversionRate,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::TotalDirectTransactions,
        Feature::ClickDirectTransactions,
        Feature::RegisterDirectTransactions,
        Feature::DirectPurchases,
        Feature::GuidanceDirectTransactions,
        Feature::IndirectTransactions,
        Feature::ActivityDays,
        Feature::SocialNetworkRole,
        Feature::SocialNetworkSize,
        Feature::FrequentVisits,
        Feature::VariousVisits,
        Feature::ConversionRate,
    ];

    /// Canonical CSV column key.
    pub fn key(self) -> &'static str {
        match self {
            Feature::TotalDirectTransactions => "total_direct_transactions",
            Feature::ClickDirectTransactions => "click_direct_transactions",
            Feature::RegisterDirectTransactions => "register_direct_transactions",
            Feature::DirectPurchases => "direct_purchases",
            Feature::GuidanceDirectTransactions => "guidance_direct_transactions",
            Feature::IndirectTransactions => "indirect_transactions",
            Feature::ActivityDays => "activity_days",
            Feature::SocialNetworkRole => "social_network_role",
            Feature::SocialNetworkSize => "social_network_size",
            Feature::FrequentVisits => "frequent_visits",
            Feature::VariousVisits => "various_visits",
            Feature::ConversionRate => "conversion_rate",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Feature::TotalDirectTransactions => "Total direct transactions",
            Feature::ClickDirectTransactions => "Click on direct transactions",
            Feature::RegisterDirectTransactions => "Register direct transactions",
            Feature::DirectPurchases => "Direct purchases",
            Feature::GuidanceDirectTransactions => "Guidance for direct transactions",
            Feature::IndirectTransactions => "Indirect transactions",
            Feature::ActivityDays => "Activity days",
            Feature::SocialNetworkRole => "Role in social networks",
            Feature::SocialNetworkSize => "Customer social network size",
            Feature::FrequentVisits => "Number of frequent customer visits",
            Feature::VariousVisits => "Various visits",
            Feature::ConversionRate => "Conversion rate",
        }
    }

    pub fn from_key(key: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.key() == key)
    }

    pub fn index(self) -> usize {
        Feature::ALL.iter().position(|&f| f == self).unwrap()
    }

    /// The role encoding is an arbitrary ordinal; every other feature is a
    /// count, day, size, or rate and must be non-negative.
    fn allows_negative(self) -> bool {
        self == Feature::SocialNetworkRole
    }
}

/// One customer row. Inactive feature slots hold 0 and are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerRecord {
    pub customer_id: String,
    pub features: [f64; FEATURE_COUNT],
}

/// Customer rows plus the set of features their source actually carried.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerSet {
    records: Vec<CustomerRecord>,
    active: Vec<Feature>,
}

impl CustomerSet {
    pub fn new(records: Vec<CustomerRecord>, mut active: Vec<Feature>) -> Result<CustomerSet> {
        active.sort_by_key(|f| f.index());
        active.dedup();
        for r in &records {
            for &f in &active {
                if !r.features[f.index()].is_finite() {
                    return Err(Error::invalid(format!(
                        "customer {}: feature {} is not finite",
                        r.customer_id,
                        f.key()
                    )));
                }
            }
        }
        Ok(CustomerSet { records, active })
    }

    pub fn records(&self) -> &[CustomerRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn active_features(&self) -> &[Feature] {
        &self.active
    }

    /// Features the source did not carry, in canonical order.
    pub fn absent_features(&self) -> Vec<Feature> {
        Feature::ALL
            .into_iter()
            .filter(|f| !self.active.contains(f))
            .collect()
    }

    pub fn value(&self, row: usize, f: Feature) -> f64 {
        self.records[row].features[f.index()]
    }
}

/// Loads customers from CSV. The header must name `customer_id` plus any
/// subset of the twelve canonical feature keys; unknown columns and missing
/// cells are rejected with their location.
pub fn load_customers<R: Read>(source: R) -> Result<CustomerSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let mut id_col = None;
    let mut columns: Vec<(usize, Feature)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        let name = name.trim();
        if name == "customer_id" {
            if id_col.is_some() {
                return Err(Error::parse(1, "duplicate customer_id column"));
            }
            id_col = Some(i);
        } else if let Some(f) = Feature::from_key(name) {
            if columns.iter().any(|&(_, existing)| existing == f) {
                return Err(Error::parse(1, format!("duplicate column {name:?}")));
            }
            columns.push((i, f));
        } else {
            return Err(Error::parse(1, format!("unknown column {name:?}")));
        }
    }
    let id_col = id_col.ok_or_else(|| Error::parse(1, "missing customer_id column"))?;

    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(records.len() + 2);
        let customer_id = record
            .get(id_col)
            .unwrap_or_default()
            .trim()
            .to_string();
        let mut features = [0.0f64; FEATURE_COUNT];
        for &(col, f) in &columns {
            let cell = record.get(col).unwrap_or_default().trim();
            if cell.is_empty() {
                return Err(Error::parse(
                    line,
                    format!("missing value for {} (customer {customer_id})", f.key()),
                ));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(
                    line,
                    format!("non-numeric value {cell:?} in column {}", f.key()),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    line,
                    format!("non-finite value in column {}", f.key()),
                ));
            }
            if v < 0.0 && !f.allows_negative() {
                return Err(Error::parse(
                    line,
                    format!("negative value {v} in column {}", f.key()),
                ));
            }
            features[f.index()] = v;
        }
        records.push(CustomerRecord {
            customer_id,
            features,
        });
    }
    let active = columns.into_iter().map(|(_, f)| f).collect();
    CustomerSet::new(records, active)
}

/// Writes `customer_id` plus the active feature columns.
pub fn write_customers_csv<W: Write>(set: &CustomerSet, mut out: W) -> Result<()> {
    let mut header = String::from("customer_id");
    for f in set.active_features() {
        header.push(',');
        header.push_str(f.key());
    }
    writeln!(out, "{header}")?;
    for r in set.records() {
        let mut line = r.customer_id.clone();
        for f in set.active_features() {
            line.push_str(&format!(",{}", r.features[f.index()]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Controls the planted cluster structure of synthetic customers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Number of planted clusters.
    pub clusters: usize,
    /// Per-feature gap between consecutive cluster means.
    pub separations: [f64; FEATURE_COUNT],
    /// Gaussian noise applied to every cell.
    pub noise_sd: f64,
}

impl Default for SynthSpec {
    fn default() -> SynthSpec {
        SynthSpec {
            clusters: 2,
            separations: [10.0; FEATURE_COUNT],
            noise_sd: 1.0,
        }
    }
}

impl SynthSpec {
    /// Clusters separated on a single feature; every other gap is 0.
    pub fn single_feature(clusters: usize, feature: Feature, gap: f64, noise_sd: f64) -> SynthSpec {
        let mut separations = [0.0; FEATURE_COUNT];
        separations[feature.index()] = gap;
        SynthSpec {
            clusters,
            separations,
            noise_sd,
        }
    }
}

/// Synthetic customers with their planted cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCustomers {
    pub set: CustomerSet,
    pub planted: Vec<usize>,
}

/// Generates `n` customers with planted clusters; record `i` belongs to
/// cluster `i % clusters`. Deterministic per seed. Count-like features are
/// clamped at zero.
pub fn synth_customers(seed: u64, n: usize, spec: &SynthSpec) -> Result<SynthCustomers> {
    if n < 1 {
        return Err(Error::invalid("need at least one customer"));
    }
    if spec.clusters < 1 {
        return Err(Error::invalid("need at least one planted cluster"));
    }
    if !spec.noise_sd.is_finite() || spec.noise_sd < 0.0 {
        return Err(Error::invalid("noise_sd must be finite and non-negative"));
    }
    if spec.separations.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::invalid("separations must be finite and non-negative"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid(e.to_string()))?;
    // base offset keeps clamping rare so planted gaps survive
    let base = 4.0 * spec.noise_sd;

    let mut records = Vec::with_capacity(n);
    let mut planted = Vec::with_capacity(n);
    for i in 0..n {
        let cluster = i % spec.clusters;
        let mut features = [0.0f64; FEATURE_COUNT];
        for (j, f) in Feature::ALL.into_iter().enumerate() {
            let mut v = base + cluster as f64 * spec.separations[j];
            if spec.noise_sd > 0.0 {
                v += noise.sample(&mut rng);
            }
            if !f.allows_negative() {
                v = v.max(0.0);
            }
            features[j] = v;
        }
        records.push(CustomerRecord {
            customer_id: format!("c{i}"),
            features,
        });
        planted.push(cluster);
    }
    Ok(SynthCustomers {
        set: CustomerSet::new(records, Feature::ALL.to_vec())?,
        planted,
    })
}

/// Per-feature standardization constants used before clustering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScale {
    pub feature: Feature,
    pub mean: f64,
    pub sd: f64,
}

/// Clustering outcome plus the standardization applied to reach it.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerClustering {
    pub assignment: Assignment,
    pub k: usize,
    pub standardization: Vec<FeatureScale>,
}

/// Clusters customers on z-scored active features: pruned k-means for
/// k >= 2, plain Lloyd for k = 1. Constant features standardize to zero.
pub fn cluster_customers(set: &CustomerSet, k: usize, seed: u64) -> Result<CustomerClustering> {
    if set.is_empty() {
        return Err(Error::invalid("cannot cluster zero customers"));
    }
    if set.active_features().is_empty() {
        return Err(Error::invalid("no active features to cluster on"));
    }
    let n = set.len();
    if k < 1 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }

    let features = set.active_features();
    let d = features.len();
    let mut scales = Vec::with_capacity(d);
    let mut data = vec![0.0f64; n * d];
    for (j, &f) in features.iter().enumerate() {
        let column: Vec<f64> = (0..n).map(|i| set.value(i, f)).collect();
        let mean = column.iter().sum::<f64>() / n as f64;
        let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for (i, &v) in column.iter().enumerate() {
            data[i * d + j] = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
        }
        scales.push(FeatureScale {
            feature: f,
            mean,
            sd,
        });
    }

    let ps = PointSet::new(data, d)?;
    let init = seed_centroids(&ps, k, seed)?;
    let run = if k == 1 {
        lloyd_kmeans(&ps, &init, 100)?
    } else {
        pruned_kmeans(&ps, &init, default_width(&ps, k), 100)?
    };
    Ok(CustomerClustering {
        assignment: run.assignment,
        k,
        standardization: scales,
    })
}

/// One scored feature: percentage of raw variance explained by the
/// clustering, plus the underlying sums of squares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactEntry {
    pub feature: Feature,
    pub impact_pct: f64,
    pub ssb: f64,
    pub ssw: f64,
    pub sst: f64,
}

/// Per-feature impact percentages, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactReport {
    entries: Vec<ImpactEntry>,
    absent: Vec<Feature>,
}

impl ImpactReport {
    pub fn entries(&self) -> &[ImpactEntry] {
        &self.entries
    }

    /// Features absent from the source, excluded from scoring.
    pub fn absent(&self) -> &[Feature] {
        &self.absent
    }

    /// Feature keys from highest to lowest impact.
    pub fn ordering(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.feature.key()).collect()
    }

    pub fn impact_of(&self, f: Feature) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.feature == f)
            .map(|e| e.impact_pct)
    }

    /// Bar-chart data: `feature,name,impact_pct`.
    pub fn write_plot_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "feature,name,impact_pct")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{}",
                e.feature.key(),
                e.feature.display_name(),
                e.impact_pct
            )?;
        }
        Ok(())
    }
}

/// Scores every active feature as 100 * SSB / SST on raw values. Constant
/// features score 0. Needs at least two non-empty clusters.
pub fn feature_impact(set: &CustomerSet, labels: &[usize]) -> Result<ImpactReport> {
    if labels.len() != set.len() {
        return Err(Error::invalid("label count does not match customer count"));
    }
    if set.active_features().is_empty() {
        return Err(Error::invalid("no active features to score"));
    }
    let mut cluster_ids: Vec<usize> = labels.to_vec();
    cluster_ids.sort_unstable();
    cluster_ids.dedup();
    if cluster_ids.len() < 2 {
        return Err(Error::invalid(
            "impact needs at least two non-empty clusters",
        ));
    }

    let n = set.len();
    let mut entries = Vec::with_capacity(set.active_features().len());
    for &f in set.active_features() {
        let column: Vec<f64> = (0..n).map(|i| set.value(i, f)).collect();
        let grand = column.iter().sum::<f64>() / n as f64;
        let sst: f64 = column.iter().map(|v| (v - grand) * (v - grand)).sum();

        let mut sums: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            let entry = sums.entry(l).or_insert((0.0, 0));
            entry.0 += column[i];
            entry.1 += 1;
        }
        let ssb: f64 = sums
            .values()
            .map(|&(sum, count)| {
                let mean = sum / count as f64;
                count as f64 * (mean - grand) * (mean - grand)
            })
            .sum();
        let ssw: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (sum, count) = sums[l];
                let mean = sum / count as f64;
                (column[i] - mean) * (column[i] - mean)
            })
            .sum();

        let impact_pct = if sst > 0.0 {
            (100.0 * ssb / sst).clamp(0.0, 100.0)
        } else {
            0.0
        };
        entries.push(ImpactEntry {
            feature: f,
            impact_pct,
            ssb,
            ssw,
            sst,
        });
    }
    entries.sort_by(|a, b| {
        b.impact_pct
            .partial_cmp(&a.impact_pct)
            .unwrap()
            .then(a.feature.index().cmp(&b.feature.index()))
    });
    Ok(ImpactReport {
        entries,
        absent: set.absent_features(),
    })
}
