//! Synthetic benchmarks, the two-cluster separation theory and α sweeps.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::affinity::{build_affinities, calibrate_bandwidth, NeighborMode};
use crate::data::{DataMatrix, Embedding};
use crate::error::{invalid_arg, Result};
use crate::gradient::{InterpConfig, Solver};
use crate::kernel::KernelParams;
use crate::math;
use crate::metrics::{
    adaptive_eps, dbscan, knn_preservation_many, mean_separation_ratio, ADAPTIVE_MIN_PTS,
    DBSCAN_DEFAULT_EPS, DBSCAN_DEFAULT_MIN_PTS,
};
use crate::optimizer::{pca_init, random_init, run, OptimizerConfig, DEFAULT_INIT_SD};
use crate::par::Execution;

/// Sweeps use the exact solver up to this many points.
pub const EXACT_SOLVER_LIMIT: usize = 2000;

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `m` distinct indices out of `0..n`, sorted; all of them when `m ≥ n`.
pub fn subsample_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// `n_classes` Gaussian classes `N(offset · e_i, I_dim)`, `n_per_class`
/// points each, stored class by class.
pub fn gen_gaussian_clusters(
    n_per_class: usize,
    n_classes: usize,
    dim: usize,
    offset: f64,
    seed: u64,
) -> Result<(DataMatrix, Vec<i64>)> {
    if n_classes > dim {
        return Err(invalid_arg!("n_classes ({n_classes}) exceeds dim ({dim})"));
    }
    if n_classes == 0 || n_per_class == 0 {
        return Err(invalid_arg!(
            "need at least one class with at least one point"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * n_classes;
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..n_classes {
        for _ in 0..n_per_class {
            for j in 0..dim {
                let mean = if j == class { offset } else { 0.0 };
                values.push(mean + standard_normal(&mut rng));
            }
            labels.push(class as i64);
        }
    }
    Ok((DataMatrix::new(n, dim, values)?, labels))
}

/// Ten 100-point classes in 20 dimensions, class `i` centred at `4 e_i`, with
/// the first half of each class shifted by `+2 e_{10+i}` and the second half
/// by `−2 e_{10+i}`. Sub-labels number the halves `2i` and `2i + 1`.
pub fn gen_dumbbells(seed: u64) -> Result<(DataMatrix, Vec<i64>, Vec<i64>)> {
    const CLASSES: usize = 10;
    const PER_CLASS: usize = 100;
    let dim = 2 * CLASSES;
    let (data, labels) = gen_gaussian_clusters(PER_CLASS, CLASSES, dim, 4.0, seed)?;
    let mut values = data.into_values();
    let mut sub_labels = Vec::with_capacity(labels.len());
    for (i, &class) in labels.iter().enumerate() {
        let first_half = i % PER_CLASS < PER_CLASS / 2;
        let axis = CLASSES + class as usize;
        values[i * dim + axis] += if first_half { 2.0 } else { -2.0 };
        sub_labels.push(2 * class + if first_half { 0 } else { 1 });
    }
    Ok((
        DataMatrix::new(labels.len(), dim, values)?,
        labels,
        sub_labels,
    ))
}

/// Two 100-point standard Gaussian clusters in 10 dimensions centred at
/// `5 e_1` and `5 e_2` (centroids `5√2` apart).
pub fn gen_two_clusters(seed: u64) -> Result<(DataMatrix, Vec<i64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 10;
    let mut values = Vec::with_capacity(200 * dim);
    let mut labels = Vec::with_capacity(200);
    for class in 0..2 {
        for _ in 0..100 {
            for j in 0..dim {
                let mean = if j == class { 5.0 } else { 0.0 };
                values.push(mean + standard_normal(&mut rng));
            }
            labels.push(class as i64);
        }
    }
    Ok((DataMatrix::new(200, dim, values)?, labels))
}

/// Idealised two-cluster configuration: every within-cluster distance is
/// `d_w_input`, every between-cluster distance `d_b_input`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryCase {
    pub d_w_input: f64,
    pub d_b_input: f64,
    pub n_per_cluster: usize,
    pub perplexity: f64,
    /// Calibrated bandwidth (the same for every point by symmetry).
    pub sigma: f64,
    /// Symmetric affinity of a within-cluster pair.
    pub p_w: f64,
    /// Symmetric affinity of a between-cluster pair.
    pub p_b: f64,
    /// `K(D_b) / K(D_w)` for the calibrated Gaussian `K`.
    pub c: f64,
}

impl TheoryCase {
    pub fn new(d_w: f64, d_b: f64, n_per_cluster: usize, perplexity: f64) -> Result<Self> {
        if !(d_w > 0.0 && d_b > d_w && d_b.is_finite()) {
            return Err(invalid_arg!(
                "need 0 < D_w < D_b, got D_w = {d_w}, D_b = {d_b}"
            ));
        }
        if n_per_cluster < 2 {
            return Err(invalid_arg!("need at least two points per cluster"));
        }
        let m = n_per_cluster;
        let mut distances = alloc::vec![d_w; m - 1];
        distances.extend(core::iter::repeat(d_b).take(m));
        let cal = calibrate_bandwidth(&distances, perplexity)?;
        let total = (2 * m) as f64;
        let beta = 1.0 / (2.0 * cal.sigma * cal.sigma);
        Ok(Self {
            d_w_input: d_w,
            d_b_input: d_b,
            n_per_cluster,
            perplexity,
            sigma: cal.sigma,
            p_w: cal.row[0] / total,
            p_b: cal.row[m - 1] / total,
            c: math::exp(-beta * (d_b * d_b - d_w * d_w)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationPrediction {
    /// `√((α + d_b²)/(α + d_w²)) = c^(−1/(2α))`
    pub ratio: f64,
    pub d_b: f64,
}

/// Embedding distances that reproduce the affinity ratio `c` exactly:
/// `(α + d_b²)/(α + d_w²) = c^(−1/α)`.
pub fn predicted_separation(alpha: f64, c: f64, d_w: f64) -> Result<SeparationPrediction> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid_arg!("alpha must be positive, got {alpha}"));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid_arg!("c must lie in (0, 1), got {c}"));
    }
    if !(d_w.is_finite() && d_w >= 0.0) {
        return Err(invalid_arg!("d_w must be non-negative, got {d_w}"));
    }
    let ln_c = math::ln(c);
    let ratio = math::exp(-ln_c / (2.0 * alpha));
    let growth = math::exp(-ln_c / alpha) - 1.0;
    let d_b = math::sqrt(d_w * d_w + growth * (alpha + d_w * d_w));
    Ok(SeparationPrediction { ratio, d_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    #[default]
    Pca,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub perplexity: f64,
    pub optimizer: OptimizerConfig,
    pub interp: InterpConfig,
    /// `None` picks the exact solver up to [`EXACT_SOLVER_LIMIT`] points.
    pub solver: Option<Solver>,
    pub neighbor_mode: NeighborMode,
    pub init: InitMode,
    /// k values for k-NN preservation; empty skips the metric.
    pub knn_ks: Vec<usize>,
    /// `min_pts` for the adaptive-eps cluster count.
    pub adaptive_min_pts: usize,
    pub dbscan_fixed_eps: f64,
    /// `min_pts` for the fixed-eps cluster count.
    pub dbscan_min_pts: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            perplexity: 50.0,
            optimizer: OptimizerConfig::default(),
            interp: InterpConfig::default(),
            solver: None,
            neighbor_mode: NeighborMode::Exact,
            init: InitMode::Pca,
            knn_ks: Vec::new(),
            adaptive_min_pts: ADAPTIVE_MIN_PTS,
            dbscan_fixed_eps: DBSCAN_DEFAULT_EPS,
            dbscan_min_pts: DBSCAN_DEFAULT_MIN_PTS,
        }
    }
}

impl SweepConfig {
    pub fn solver_for(&self, n: usize) -> Solver {
        self.solver.unwrap_or(if n <= EXACT_SOLVER_LIMIT {
            Solver::Exact
        } else {
            Solver::Accelerated
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    /// Mean over class pairs; absent without labels.
    pub separation_ratio: Option<f64>,
    pub kl: f64,
    pub knn_preservation: BTreeMap<usize, f64>,
    /// DBSCAN count at the adaptive eps.
    pub cluster_count: usize,
    pub eps: f64,
    pub fixed_eps_cluster_count: usize,
    pub wall_time_seconds: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub embedding: Option<Embedding>,
}

/// Initial embedding shared by all runs of a sweep.
pub fn initial_embedding(
    data: &DataMatrix,
    mode: InitMode,
    seed: u64,
) -> Result<(Embedding, Vec<String>)> {
    match mode {
        InitMode::Pca if data.n_cols() >= 2 => pca_init(data, DEFAULT_INIT_SD, seed),
        InitMode::Pca => Ok((
            random_init(data.n_rows(), DEFAULT_INIT_SD, seed)?,
            alloc::vec![String::from(
                "PCA initialisation needs 2 features; used random initialisation"
            )],
        )),
        InitMode::Random => Ok((
            random_init(data.n_rows(), DEFAULT_INIT_SD, seed)?,
            Vec::new(),
        )),
    }
}

/// One optimisation per α from the same affinities and initial embedding,
/// rows in the order of `alphas`.
pub fn sweep_alpha(
    data: &DataMatrix,
    labels: Option<&[i64]>,
    alphas: &[f64],
    config: &SweepConfig,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(invalid_arg!("empty alpha list"));
    }
    let kernels = alphas
        .iter()
        .map(|&a| KernelParams::simplified(a))
        .collect::<Result<Vec<_>>>()?;
    let seed = config.optimizer.seed;
    let p = build_affinities(data, config.perplexity, config.neighbor_mode, seed, exec)?;
    let (init, init_warnings) = initial_embedding(data, config.init, seed)?;
    let solver = config.solver_for(data.n_rows());

    let mut rows = Vec::with_capacity(alphas.len());
    for (params, &alpha) in kernels.iter().zip(alphas) {
        let report = run(
            &p,
            &init,
            params,
            &config.optimizer,
            &config.interp,
            solver,
            exec,
        )?;
        let emb = report.final_embedding;
        let separation = match labels {
            Some(l) => Some(mean_separation_ratio(&emb, l)?),
            None => None,
        };
        let eps = adaptive_eps(&emb, exec)?;
        let cluster_count = dbscan(&emb, eps, config.adaptive_min_pts, exec)?.cluster_count;
        let fixed_eps_cluster_count =
            dbscan(&emb, config.dbscan_fixed_eps, config.dbscan_min_pts, exec)?.cluster_count;
        let knn = if config.knn_ks.is_empty() {
            BTreeMap::new()
        } else {
            let v = knn_preservation_many(data, &emb, &config.knn_ks, exec)?;
            config.knn_ks.iter().copied().zip(v).collect()
        };
        let mut warnings = init_warnings.clone();
        warnings.extend(report.warnings);
        rows.push(SweepRow {
            alpha,
            separation_ratio: separation,
            kl: report.final_kl,
            knn_preservation: knn,
            cluster_count,
            eps,
            fixed_eps_cluster_count,
            wall_time_seconds: report.wall_time_seconds,
            warnings,
            embedding: Some(emb),
        });
    }
    Ok(rows)
}
