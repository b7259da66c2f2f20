//! Lloyd k-means and the interval-pruned variant.
//!
//! The pruned variant buckets points by their assignment margin `e`
//! (distance to the runner-up center minus distance to the winner) into
//! intervals of a fixed `width`, tagging interval `i` with `i * width`.
//! After each centroid update with maximum displacement `D`, every tag drops
//! by `2 * D`; only points in intervals whose tag reached zero are
//! re-examined. A point whose tag stays positive has margin strictly above
//! the accumulated `2 * D`, so its winner cannot have changed and skipping
//! it is exact, not approximate: both variants produce identical labels,
//! centroids, and iteration counts.
//!
//! Assignment and margin scans are data-parallel over points; centroid and
//! objective accumulation run over fixed-size chunks folded in chunk order,
//! so results are bit-identical for any worker count.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Fixed accumulation chunk; summation order never depends on thread count.
const CHUNK: usize = 1024;

/// Rows of real-valued points with per-row opaque ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
    ids: Vec<u64>,
}

impl PointSet {
    pub fn new(data: Vec<f64>, d: usize) -> Result<PointSet> {
        if d == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "data length {} is not a positive multiple of dimension {d}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        let n = data.len() / d;
        let ids = (0..n as u64).collect();
        Ok(PointSet { data, n, d, ids })
    }

    pub fn with_ids(data: Vec<f64>, d: usize, ids: Vec<u64>) -> Result<PointSet> {
        let mut ps = PointSet::new(data, d)?;
        if ids.len() != ps.n {
            return Err(Error::invalid(format!(
                "id count {} does not match point count {}",
                ids.len(),
                ps.n
            )));
        }
        ps.ids = ids;
        Ok(ps)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Length of the bounding-box diagonal; 0 for a single repeated point.
    pub fn bounding_box_diagonal(&self) -> f64 {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for i in 0..self.n {
            for (j, &v) in self.row(i).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(&l, &h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cluster centers, k rows by d columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    data: Vec<f64>,
    k: usize,
    d: usize,
}

impl Centroids {
    pub fn new(data: Vec<f64>, d: usize) -> Result<Centroids> {
        if d == 0 || data.is_empty() || !data.len().is_multiple_of(d) {
            return Err(Error::invalid("centroid data shape mismatch"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("centroids must be finite"));
        }
        let k = data.len() / d;
        Ok(Centroids { data, k, d })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }
}

/// Per-point cluster labels plus the summed squared distance objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub objective: f64,
}

/// One finished k-means run. `visits_per_iter[0]` is the initial full pass;
/// entry `t` counts the points re-examined in iteration `t`. Objectives are
/// recorded after the initial pass and after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansRun {
    pub centroids: Centroids,
    pub assignment: Assignment,
    pub iterations: usize,
    pub objective_per_iter: Vec<f64>,
    pub deviation_per_iter: Vec<f64>,
    pub visits_per_iter: Vec<usize>,
    /// Skipped points whose winner a full reassignment would have changed;
    /// populated only by the shadow-checked pruned variant, always 0 when
    /// the interval bound is honored.
    pub shadow_violations: Option<usize>,
}

impl KmeansRun {
    pub fn total_visits(&self) -> usize {
        self.visits_per_iter.iter().sum()
    }
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Winner index (ties to the lowest cluster index), its squared distance,
/// and the runner-up squared distance.
fn nearest(x: &[f64], c: &Centroids) -> (usize, f64, f64) {
    let mut best = 0usize;
    let mut best_d = d2(x, c.row(0));
    let mut second_d = f64::INFINITY;
    for j in 1..c.k {
        let dj = d2(x, c.row(j));
        if dj < best_d {
            second_d = best_d;
            best = j;
            best_d = dj;
        } else if dj < second_d {
            second_d = dj;
        }
    }
    (best, best_d, second_d)
}

/// Deterministic k-means++-style seeding: first center uniform, later
/// centers sampled proportionally to squared distance from the chosen set.
/// When every remaining point coincides with a center, the lowest unchosen
/// index is taken, so `k = n` always yields a permutation of the points.
pub fn seed_centroids(ps: &PointSet, k: usize, seed: u64) -> Result<Centroids> {
    if k < 1 || k > ps.len() {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={}",
            ps.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ps.len();
    let mut chosen = vec![false; n];
    let mut picks = Vec::with_capacity(k);

    let first = rng.gen_range(0..n);
    picks.push(first);
    chosen[first] = true;
    let mut min_d2: Vec<f64> = (0..n).map(|i| d2(ps.row(i), ps.row(first))).collect();

    while picks.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            let mut last_nonzero = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w > 0.0 {
                    last_nonzero = Some(i);
                    cum += w;
                    if cum > r {
                        pick = Some(i);
                        break;
                    }
                }
            }
            pick.or(last_nonzero).unwrap()
        } else {
            (0..n).find(|&i| !chosen[i]).expect("k <= n leaves a point")
        };
        picks.push(next);
        chosen[next] = true;
        for (i, slot) in min_d2.iter_mut().enumerate() {
            let dn = d2(ps.row(i), ps.row(next));
            if dn < *slot {
                *slot = dn;
            }
        }
    }

    let mut data = Vec::with_capacity(k * ps.dim());
    for &p in &picks {
        data.extend_from_slice(ps.row(p));
    }
    Centroids::new(data, ps.dim())
}

/// Labels every point with its nearest center by squared Euclidean
/// distance, ties to the lowest cluster index.
pub fn assign(ps: &PointSet, c: &Centroids) -> Result<Assignment> {
    check_dims(ps, c)?;
    let (labels, objective) = assign_all(ps, c);
    Ok(Assignment { labels, objective })
}

fn check_dims(ps: &PointSet, c: &Centroids) -> Result<()> {
    if ps.dim() != c.dim() {
        return Err(Error::invalid(format!(
            "point dimension {} does not match centroid dimension {}",
            ps.dim(),
            c.dim()
        )));
    }
    Ok(())
}

fn assign_all(ps: &PointSet, c: &Centroids) -> (Vec<usize>, f64) {
    let results: Vec<(Vec<usize>, f64)> = (0..ps.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut labels = Vec::with_capacity(chunk.len());
            let mut obj = 0.0;
            for &i in chunk {
                let (w, dw, _) = nearest(ps.row(i), c);
                labels.push(w);
                obj += dw;
            }
            (labels, obj)
        })
        .collect();
    let mut labels = Vec::with_capacity(ps.len());
    let mut objective = 0.0;
    for (chunk_labels, chunk_obj) in results {
        labels.extend(chunk_labels);
        objective += chunk_obj;
    }
    (labels, objective)
}

/// Assignment margin: distance to the runner-up center minus distance to
/// the winner. Undefined with fewer than two centers.
pub fn margin(point: &[f64], c: &Centroids) -> Result<f64> {
    if c.k() < 2 {
        return Err(Error::invalid("margin needs at least two centers"));
    }
    if point.len() != c.dim() {
        return Err(Error::invalid("point dimension mismatch"));
    }
    let (_, dw, ds) = nearest(point, c);
    Ok(ds.sqrt() - dw.sqrt())
}

/// The clustering objective: summed squared distance of every point to its
/// assigned center.
pub fn kmeans_objective(ps: &PointSet, c: &Centroids, a: &Assignment) -> Result<f64> {
    check_dims(ps, c)?;
    if a.labels.len() != ps.len() {
        return Err(Error::invalid("label count does not match point count"));
    }
    if a.labels.iter().any(|&l| l >= c.k()) {
        return Err(Error::invalid("label outside cluster range"));
    }
    Ok(objective_of(ps, c, &a.labels))
}

fn objective_of(ps: &PointSet, c: &Centroids, labels: &[usize]) -> f64 {
    let partials: Vec<f64> = (0..ps.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut obj = 0.0;
            for &i in chunk {
                obj += d2(ps.row(i), c.row(labels[i]));
            }
            obj
        })
        .collect();
    partials.into_iter().sum()
}

/// Mean update with the shared empty-cluster rule. Returns the new centers
/// and the maximum center displacement D.
fn update_centroids(ps: &PointSet, labels: &[usize], old: &Centroids) -> (Centroids, f64) {
    let k = old.k();
    let d = old.dim();
    let partials: Vec<(Vec<f64>, Vec<usize>)> = (0..ps.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sums = vec![0.0f64; k * d];
            let mut counts = vec![0usize; k];
            for &i in chunk {
                let l = labels[i];
                counts[l] += 1;
                let row = ps.row(i);
                let target = &mut sums[l * d..(l + 1) * d];
                for (t, &v) in target.iter_mut().zip(row) {
                    *t += v;
                }
            }
            (sums, counts)
        })
        .collect();

    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0usize; k];
    for (chunk_sums, chunk_counts) in partials {
        for (t, v) in sums.iter_mut().zip(chunk_sums) {
            *t += v;
        }
        for (t, v) in counts.iter_mut().zip(chunk_counts) {
            *t += v;
        }
    }

    let mut data = vec![0.0f64; k * d];
    for j in 0..k {
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            for x in 0..d {
                data[j * d + x] = sums[j * d + x] * inv;
            }
        }
    }

    // emptied clusters restart at the point farthest from its own center
    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    if !empty.is_empty() {
        let mut dist: Vec<f64> = (0..ps.len())
            .map(|i| d2(ps.row(i), old.row(labels[i])))
            .collect();
        for &j in &empty {
            let mut best = None;
            let mut best_d = f64::NEG_INFINITY;
            for (i, &v) in dist.iter().enumerate() {
                if v > best_d {
                    best_d = v;
                    best = Some(i);
                }
            }
            match best {
                Some(p) if best_d >= 0.0 => {
                    data[j * d..(j + 1) * d].copy_from_slice(ps.row(p));
                    dist[p] = f64::NEG_INFINITY;
                }
                _ => {
                    // no point left to donate; keep the old position
                    data[j * d..(j + 1) * d].copy_from_slice(old.row(j));
                }
            }
        }
    }

    let centroids = Centroids { data, k, d };
    let mut deviation: f64 = 0.0;
    for j in 0..k {
        deviation = deviation.max(d2(old.row(j), centroids.row(j)).sqrt());
    }
    (centroids, deviation)
}

/// Standard Lloyd iteration: assign, mean-update, repeat until the labels
/// stop changing or `max_iter` updates have run.
pub fn lloyd_kmeans(ps: &PointSet, init: &Centroids, max_iter: usize) -> Result<KmeansRun> {
    check_dims(ps, init)?;
    if max_iter < 1 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let n = ps.len();
    let mut centroids = init.clone();
    let (mut labels, obj0) = assign_all(ps, &centroids);
    let mut objectives = vec![obj0];
    let mut deviations = Vec::new();
    let mut visits = vec![n];
    let mut iterations = 0usize;

    loop {
        let (next, dev) = update_centroids(ps, &labels, &centroids);
        centroids = next;
        deviations.push(dev);
        iterations += 1;
        if iterations >= max_iter {
            objectives.push(objective_of(ps, &centroids, &labels));
            break;
        }
        let (new_labels, obj) = assign_all(ps, &centroids);
        visits.push(n);
        objectives.push(obj);
        let converged = new_labels == labels;
        labels = new_labels;
        if converged {
            break;
        }
    }

    let objective = *objectives.last().unwrap();
    Ok(KmeansRun {
        centroids,
        assignment: Assignment { labels, objective },
        iterations,
        objective_per_iter: objectives,
        deviation_per_iter: deviations,
        visits_per_iter: visits,
        shadow_violations: None,
    })
}

/// Margin-interval bookkeeping for the pruned variant.
#[derive(Debug)]
struct IntervalIndex {
    width: f64,
    /// interval index -> (residual tag, member points); intervals are
    /// dropped wholesale when their tag expires and members re-bucket.
    buckets: BTreeMap<u64, Bucket>,
}

#[derive(Debug)]
struct Bucket {
    tag: f64,
    points: Vec<u32>,
}

impl IntervalIndex {
    fn new(width: f64) -> IntervalIndex {
        IntervalIndex {
            width,
            buckets: BTreeMap::new(),
        }
    }

    fn interval_of(&self, e: f64) -> u64 {
        let idx = (e / self.width).floor();
        if idx >= u64::MAX as f64 {
            u64::MAX
        } else {
            idx as u64
        }
    }

    fn place(&mut self, point: u32, e: f64) {
        let idx = self.interval_of(e);
        let width = self.width;
        self.buckets
            .entry(idx)
            .or_insert_with(|| Bucket {
                tag: idx as f64 * width,
                points: Vec::new(),
            })
            .points
            .push(point);
    }

    /// Every surviving tag drops by exactly 2 * D.
    fn decay(&mut self, deviation: f64) {
        for bucket in self.buckets.values_mut() {
            bucket.tag -= 2.0 * deviation;
        }
    }

    /// Removes and returns the members of every interval whose tag expired.
    fn drain_due(&mut self) -> Vec<u32> {
        let due: Vec<u64> = self
            .buckets
            .iter()
            .filter(|(_, b)| b.tag <= 0.0)
            .map(|(&i, _)| i)
            .collect();
        let mut points = Vec::new();
        for idx in due {
            points.extend(self.buckets.remove(&idx).unwrap().points);
        }
        points.sort_unstable();
        points
    }
}

/// Options for [`pruned_kmeans_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PrunedOptions {
    /// After every iteration, fully reassign and verify that no skipped
    /// point's winner changed. Expensive; for validation runs.
    pub shadow_check: bool,
}

/// Interval-pruned k-means; exact same labels, centroids, and iteration
/// count as [`lloyd_kmeans`] on the same inputs.
pub fn pruned_kmeans(
    ps: &PointSet,
    init: &Centroids,
    width: f64,
    max_iter: usize,
) -> Result<KmeansRun> {
    pruned_kmeans_with(ps, init, width, max_iter, PrunedOptions::default())
}

pub fn pruned_kmeans_with(
    ps: &PointSet,
    init: &Centroids,
    width: f64,
    max_iter: usize,
    opts: PrunedOptions,
) -> Result<KmeansRun> {
    check_dims(ps, init)?;
    if width <= 0.0 || !width.is_finite() {
        return Err(Error::invalid("interval width must be positive"));
    }
    if init.k() < 2 {
        return Err(Error::invalid(
            "pruned k-means needs k >= 2 (margins are undefined with one center)",
        ));
    }
    if max_iter < 1 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }

    let n = ps.len();
    let mut centroids = init.clone();
    let mut labels = vec![0usize; n];
    let mut index = IntervalIndex::new(width);

    let all: Vec<u32> = (0..n as u32).collect();
    visit_points(ps, &centroids, &all, &mut labels, &mut index);
    let mut objectives = vec![objective_of(ps, &centroids, &labels)];
    let mut deviations = Vec::new();
    let mut visits = vec![n];
    let mut iterations = 0usize;
    let mut shadow_violations = 0usize;

    loop {
        let (next, dev) = update_centroids(ps, &labels, &centroids);
        centroids = next;
        deviations.push(dev);
        iterations += 1;
        if iterations >= max_iter {
            objectives.push(objective_of(ps, &centroids, &labels));
            break;
        }
        index.decay(dev);
        let revisit = index.drain_due();
        visits.push(revisit.len());
        let changed = visit_points(ps, &centroids, &revisit, &mut labels, &mut index);
        if opts.shadow_check {
            shadow_violations += shadow_check(ps, &centroids, &labels, &revisit);
        }
        objectives.push(objective_of(ps, &centroids, &labels));
        if changed == 0 {
            break;
        }
    }

    let objective = *objectives.last().unwrap();
    Ok(KmeansRun {
        centroids,
        assignment: Assignment { labels, objective },
        iterations,
        objective_per_iter: objectives,
        deviation_per_iter: deviations,
        visits_per_iter: visits,
        shadow_violations: opts.shadow_check.then_some(shadow_violations),
    })
}

/// Recomputes winner and margin for the given points and re-buckets them.
/// Returns how many labels changed.
fn visit_points(
    ps: &PointSet,
    c: &Centroids,
    points: &[u32],
    labels: &mut [usize],
    index: &mut IntervalIndex,
) -> usize {
    let chunks: Vec<Vec<(u32, usize, f64)>> = points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            for &p in chunk {
                let (w, dw, ds) = nearest(ps.row(p as usize), c);
                out.push((p, w, ds.sqrt() - dw.sqrt()));
            }
            out
        })
        .collect();

    let mut changed = 0;
    for (p, w, e) in chunks.into_iter().flatten() {
        if labels[p as usize] != w {
            labels[p as usize] = w;
            changed += 1;
        }
        index.place(p, e);
    }
    changed
}

/// Counts skipped points whose winner a full reassignment disagrees with.
fn shadow_check(ps: &PointSet, c: &Centroids, labels: &[usize], revisited: &[u32]) -> usize {
    let mut was_revisited = vec![false; ps.len()];
    for &p in revisited {
        was_revisited[p as usize] = true;
    }
    (0..ps.len())
        .into_par_iter()
        .filter(|&i| !was_revisited[i] && nearest(ps.row(i), c).0 != labels[i])
        .count()
}

/// Default interval width: bounding-box diagonal over 16k, falling back to
/// 1.0 for degenerate data.
pub fn default_width(ps: &PointSet, k: usize) -> f64 {
    let diag = ps.bounding_box_diagonal();
    if diag > 0.0 && diag.is_finite() {
        diag / (16.0 * k.max(1) as f64)
    } else {
        1.0
    }
}

/// Reads a point set from CSV. A leading header row is detected by failing
/// float parses; a header whose first column is `id` supplies row ids.
pub fn read_points_csv<R: Read>(source: R) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(source);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        rows.push(record.iter().map(|s| s.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::invalid("empty point set"));
    }

    let header_present = rows[0].iter().any(|f| f.parse::<f64>().is_err());
    let id_column = header_present && rows[0][0].eq_ignore_ascii_case("id");
    let start = usize::from(header_present);
    if rows.len() <= start {
        return Err(Error::invalid("empty point set"));
    }

    let skip = usize::from(id_column);
    let d = rows[start].len() - skip;
    if d == 0 {
        return Err(Error::invalid("point rows need at least one feature"));
    }
    let mut data = Vec::with_capacity((rows.len() - start) * d);
    let mut ids = Vec::with_capacity(rows.len() - start);
    for (offset, row) in rows[start..].iter().enumerate() {
        let line = start + offset + 1;
        if row.len() != d + skip {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", d + skip, row.len()),
            ));
        }
        if id_column {
            ids.push(
                row[0]
                    .parse::<u64>()
                    .map_err(|_| Error::parse(line, format!("non-integer id {:?}", row[0])))?,
            );
        } else {
            ids.push(offset as u64);
        }
        for field in &row[skip..] {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line, format!("non-numeric value {field:?}")))?;
            data.push(v);
        }
    }
    PointSet::with_ids(data, d, ids)
}

/// Writes `id,x0,...` rows.
pub fn write_points_csv<W: Write>(ps: &PointSet, mut out: W) -> Result<()> {
    let mut header = String::from("id");
    for j in 0..ps.dim() {
        header.push_str(&format!(",x{j}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..ps.len() {
        let mut line = ps.ids[i].to_string();
        for v in ps.row(i) {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
