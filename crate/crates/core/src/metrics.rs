//! Embedding quality measures: k-NN preservation, cluster separation and
//! density-based cluster counting.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, DataMatrix, Embedding};
use crate::error::{invalid_arg, Error, Result};
use crate::math;
use crate::par::{map_range, Execution};

/// Above this many points k-NN preservation is averaged over a random
/// subset of query points of this size.
pub const KNN_QUERY_CAP: usize = 20_000;

pub const DBSCAN_DEFAULT_EPS: f64 = 0.5;
pub const DBSCAN_DEFAULT_MIN_PTS: usize = 5;

/// Neighbour rank whose median distance sets the adaptive eps.
pub const ADAPTIVE_EPS_RANK: usize = 5;

/// `min_pts` paired with the adaptive eps. With eps at twice the typical
/// 5-NN distance, `min_pts = 5` makes almost every point a core point, so
/// thin bridges of stray points chain neighbouring clusters together.
pub const ADAPTIVE_MIN_PTS: usize = 10;

/// Label of points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub knn_preservation: BTreeMap<usize, f64>,
    pub kl: f64,
    pub separation: Option<f64>,
    pub cluster_count: Option<usize>,
    /// Eps used for `cluster_count`.
    pub dbscan_eps: Option<f64>,
    /// Cluster count at the fixed default eps, for comparison.
    pub fixed_eps_cluster_count: Option<usize>,
    pub cluster_assignments: Option<Vec<i64>>,
}

/// `k` nearest rows to `i` (excluding `i`), sorted by distance then index.
fn knn_sorted<F: Fn(usize) -> f64>(n: usize, i: usize, k: usize, dist: F) -> Vec<usize> {
    let mut cands: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(j), j)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, cmp);
        cands.truncate(k);
    }
    cands.sort_unstable_by(cmp);
    cands.into_iter().map(|c| c.1).collect()
}

/// k-NN preservation for several `k` at once (neighbour lists are computed
/// once for the largest `k`).
pub fn knn_preservation_many(
    data: &DataMatrix,
    emb: &Embedding,
    ks: &[usize],
    exec: Execution,
) -> Result<Vec<f64>> {
    let n = data.n_rows();
    if emb.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: emb.len(),
        });
    }
    let k_max = ks.iter().copied().max().unwrap_or(0);
    if ks.iter().any(|&k| k == 0 || k >= n) {
        return Err(invalid_arg!("k must satisfy 0 < k < n = {n}, got {ks:?}"));
    }
    if ks.is_empty() {
        return Ok(Vec::new());
    }
    let queries: Vec<usize> = if n > KNN_QUERY_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut q = sample(&mut rng, n, KNN_QUERY_CAP).into_vec();
        q.sort_unstable();
        q
    } else {
        (0..n).collect()
    };
    let per_query = map_range(queries.len(), exec, |qi| {
        let i = queries[qi];
        let hi = knn_sorted(n, i, k_max, |j| sq_dist(data.row(i), data.row(j)));
        let lo = knn_sorted(n, i, k_max, |j| emb.sq_dist(i, j));
        ks.iter()
            .map(|&k| {
                let mut a = hi[..k].to_vec();
                let mut b = lo[..k].to_vec();
                a.sort_unstable();
                b.sort_unstable();
                let (mut x, mut y, mut common) = (0, 0, 0usize);
                while x < k && y < k {
                    match a[x].cmp(&b[y]) {
                        core::cmp::Ordering::Less => x += 1,
                        core::cmp::Ordering::Greater => y += 1,
                        core::cmp::Ordering::Equal => {
                            common += 1;
                            x += 1;
                            y += 1;
                        }
                    }
                }
                common as f64 / k as f64
            })
            .collect::<Vec<f64>>()
    });
    let m = queries.len() as f64;
    Ok((0..ks.len())
        .map(|c| per_query.iter().map(|v| v[c]).sum::<f64>() / m)
        .collect())
}

/// Mean over points of `|kNN_data(i) ∩ kNN_emb(i)| / k`, with exact
/// neighbour sets in both spaces.
pub fn knn_preservation(
    data: &DataMatrix,
    emb: &Embedding,
    k: usize,
    exec: Execution,
) -> Result<f64> {
    Ok(knn_preservation_many(data, emb, &[k], exec)?[0])
}

/// Centroid distance over the RMS within-cluster pairwise distance, with
/// within-cluster pairs pooled over both clusters.
pub fn separation_ratio(emb: &Embedding, labels: &[i64], a: i64, b: i64) -> Result<f64> {
    if labels.len() != emb.len() {
        return Err(Error::DimensionMismatch {
            expected: emb.len(),
            found: labels.len(),
        });
    }
    let mut centroid = [[0.0f64; 2]; 2];
    let mut count = [0usize; 2];
    for (c, &l) in emb.coords.iter().zip(labels) {
        for (s, &target) in [a, b].iter().enumerate() {
            if l == target {
                centroid[s][0] += c[0];
                centroid[s][1] += c[1];
                count[s] += 1;
            }
        }
    }
    for (s, &label) in [a, b].iter().enumerate() {
        if count[s] < 2 {
            return Err(invalid_arg!(
                "cluster {label} has {} point(s); the within-cluster distance needs at least 2",
                count[s]
            ));
        }
        centroid[s][0] /= count[s] as f64;
        centroid[s][1] /= count[s] as f64;
    }
    // ∑_{i<j} ‖y_i − y_j‖² = m · ∑_i ‖y_i − ȳ‖² within each cluster
    let mut scatter = [0.0f64; 2];
    for (c, &l) in emb.coords.iter().zip(labels) {
        for (s, &target) in [a, b].iter().enumerate() {
            if l == target {
                let dx = c[0] - centroid[s][0];
                let dy = c[1] - centroid[s][1];
                scatter[s] += dx * dx + dy * dy;
            }
        }
    }
    let pair_sq: f64 = (0..2).map(|s| count[s] as f64 * scatter[s]).sum();
    let pairs: f64 = (0..2).map(|s| (count[s] * (count[s] - 1) / 2) as f64).sum();
    let within = math::sqrt(pair_sq / pairs);
    let dx = centroid[0][0] - centroid[1][0];
    let dy = centroid[0][1] - centroid[1][1];
    let between = math::sqrt(dx * dx + dy * dy);
    if within == 0.0 {
        return Ok(if between == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(between / within)
}

/// [`separation_ratio`] averaged over all pairs of distinct labels
/// (noise excluded).
pub fn mean_separation_ratio(emb: &Embedding, labels: &[i64]) -> Result<f64> {
    let mut classes: Vec<i64> = labels.iter().copied().filter(|&l| l != NOISE).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(invalid_arg!("need at least two labelled classes"));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (x, &a) in classes.iter().enumerate() {
        for &b in &classes[x + 1..] {
            total += separation_ratio(emb, labels, a, b)?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Uniform-grid spatial index over 2-D points.
struct Grid {
    cell: f64,
    origin: [f64; 2],
    /// `(cell_x, cell_y, point)` sorted lexicographically.
    entries: Vec<(i64, i64, usize)>,
    max_cell: [i64; 2],
}

impl Grid {
    fn new(coords: &[[f64; 2]], cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for c in coords {
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let key = |v: f64, a: usize| math::floor((v - lo[a]) / cell) as i64;
        let mut entries: Vec<(i64, i64, usize)> = coords
            .iter()
            .enumerate()
            .map(|(i, c)| (key(c[0], 0), key(c[1], 1), i))
            .collect();
        entries.sort_unstable();
        Self {
            cell,
            origin: lo,
            entries,
            max_cell: [key(hi[0], 0), key(hi[1], 1)],
        }
    }

    fn cell_of(&self, p: [f64; 2]) -> (i64, i64) {
        (
            math::floor((p[0] - self.origin[0]) / self.cell) as i64,
            math::floor((p[1] - self.origin[1]) / self.cell) as i64,
        )
    }

    fn cell_points(&self, cx: i64, cy: i64) -> &[(i64, i64, usize)] {
        let start = self.entries.partition_point(|e| (e.0, e.1) < (cx, cy));
        let end = start + self.entries[start..].partition_point(|e| (e.0, e.1) == (cx, cy));
        &self.entries[start..end]
    }

    /// Points within distance `cell` of `p` (inclusive), in index order.
    fn within_cell_radius(&self, coords: &[[f64; 2]], p: [f64; 2]) -> Vec<usize> {
        let (cx, cy) = self.cell_of(p);
        let r2 = self.cell * self.cell;
        let mut out = Vec::new();
        for gx in cx - 1..=cx + 1 {
            for gy in cy - 1..=cy + 1 {
                for &(_, _, j) in self.cell_points(gx, gy) {
                    let dx = coords[j][0] - p[0];
                    let dy = coords[j][1] - p[1];
                    if dx * dx + dy * dy <= r2 {
                        out.push(j);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Distance from point `i` to its `k`-th nearest other point.
    fn kth_distance(&self, coords: &[[f64; 2]], i: usize, k: usize) -> f64 {
        let p = coords[i];
        let (cx, cy) = self.cell_of(p);
        let mut best: Vec<f64> = Vec::new();
        let reach = self.max_cell[0].max(self.max_cell[1]) + 1;
        let mut r = 0i64;
        loop {
            let mut visit = |gx: i64, gy: i64| {
                for &(_, _, j) in self.cell_points(gx, gy) {
                    if j != i {
                        let dx = coords[j][0] - p[0];
                        let dy = coords[j][1] - p[1];
                        best.push(dx * dx + dy * dy);
                    }
                }
            };
            if r == 0 {
                visit(cx, cy);
            } else {
                for g in -r..=r {
                    visit(cx + g, cy - r);
                    visit(cx + g, cy + r);
                }
                for g in -r + 1..r {
                    visit(cx - r, cy + g);
                    visit(cx + r, cy + g);
                }
            }
            if best.len() >= k {
                best.select_nth_unstable_by(k - 1, f64::total_cmp);
                best.truncate(k);
                let kth = best[k - 1];
                let safe = r as f64 * self.cell;
                if kth <= safe * safe || r > reach {
                    return math::sqrt(kth);
                }
            }
            r += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub cluster_count: usize,
    /// Cluster id per point, `-1` for noise. Ids are numbered by the
    /// smallest point index in each cluster.
    pub assignments: Vec<i64>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// DBSCAN on 2-D Euclidean coordinates.
///
/// A point is a core point when at least `min_pts` points (itself included)
/// lie within `eps`. Core points within `eps` of each other share a cluster.
/// A non-core point joins the cluster of its nearest core point within
/// `eps` (lowest index on ties) and is noise otherwise. That rule makes the
/// partition independent of the point order.
pub fn dbscan(emb: &Embedding, eps: f64, min_pts: usize, exec: Execution) -> Result<Clustering> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid_arg!("eps must be positive, got {eps}"));
    }
    if min_pts == 0 {
        return Err(invalid_arg!("min_pts must be positive"));
    }
    let n = emb.len();
    if n < min_pts {
        return Err(invalid_arg!(
            "need at least min_pts = {min_pts} points, got {n}"
        ));
    }
    let coords = &emb.coords;
    let grid = Grid::new(coords, eps);
    let neighborhoods = map_range(n, exec, |i| grid.within_cell_radius(coords, coords[i]));
    let core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        if core[i] {
            for &j in &neighborhoods[i] {
                if core[j] {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        if core[i] {
            root_of[i] = uf.find(i);
        } else {
            let nearest = neighborhoods[i]
                .iter()
                .filter(|&&j| core[j])
                .min_by(|&&a, &&b| {
                    emb.sq_dist(i, a)
                        .total_cmp(&emb.sq_dist(i, b))
                        .then(a.cmp(&b))
                });
            if let Some(&j) = nearest {
                root_of[i] = uf.find(j);
            }
        }
    }
    let mut id_of_root = BTreeMap::new();
    let mut assignments = vec![NOISE; n];
    for i in 0..n {
        if root_of[i] != usize::MAX {
            let next = id_of_root.len() as i64;
            assignments[i] = *id_of_root.entry(root_of[i]).or_insert(next);
        }
    }
    Ok(Clustering {
        cluster_count: id_of_root.len(),
        assignments,
    })
}

/// Distance from each point to its `k`-th nearest neighbour in the embedding.
pub fn kth_neighbor_distances(emb: &Embedding, k: usize, exec: Execution) -> Result<Vec<f64>> {
    let n = emb.len();
    if k == 0 || k >= n {
        return Err(invalid_arg!("need 0 < k < n, got k = {k} with n = {n}"));
    }
    let span = emb.span();
    if span == 0.0 {
        return Ok(vec![0.0; n]);
    }
    // about two points per occupied cell for evenly spread data
    let cell = (span / math::sqrt(n as f64 / 2.0)).max(span * 1e-9);
    let grid = Grid::new(&emb.coords, cell);
    Ok(map_range(n, exec, |i| grid.kth_distance(&emb.coords, i, k)))
}

/// Twice the median distance to the 5th nearest neighbour. Embedding scale
/// varies strongly with α, so this is the eps used for cluster counting
/// (together with [`ADAPTIVE_MIN_PTS`]).
pub fn adaptive_eps(emb: &Embedding, exec: Execution) -> Result<f64> {
    let mut d = kth_neighbor_distances(emb, ADAPTIVE_EPS_RANK, exec)?;
    let eps = 2.0 * math::median_in_place(&mut d);
    if eps > 0.0 {
        Ok(eps)
    } else {
        Err(invalid_arg!(
            "embedding is degenerate; adaptive eps is zero"
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub label: i64,
    pub size: usize,
    pub mean: Vec<f64>,
}

/// Per-cluster mean of the rows of `data`, largest cluster first (ties by
/// label). Noise is skipped.
pub fn cluster_mean_profiles(
    data: &DataMatrix,
    assignments: &[i64],
) -> Result<Vec<ClusterProfile>> {
    if assignments.len() != data.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: data.n_rows(),
            found: assignments.len(),
        });
    }
    let mut sums: BTreeMap<i64, (usize, Vec<f64>)> = BTreeMap::new();
    for (row, &label) in data.rows().zip(assignments) {
        if label == NOISE {
            continue;
        }
        let entry = sums
            .entry(label)
            .or_insert_with(|| (0, vec![0.0; data.n_cols()]));
        entry.0 += 1;
        for (s, v) in entry.1.iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut out: Vec<ClusterProfile> = sums
        .into_iter()
        .map(|(label, (size, sum))| ClusterProfile {
            label,
            size,
            mean: sum.into_iter().map(|s| s / size as f64).collect(),
        })
        .collect();
    out.sort_by(|a, b| b.size.cmp(&a.size).then(a.label.cmp(&b.label)));
    Ok(out)
}
