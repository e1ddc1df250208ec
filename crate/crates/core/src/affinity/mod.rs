//! High-dimensional affinities `p_ij`.
//!
//! Pipeline: `K = 3⌈perplexity⌉` nearest neighbours per point, a Gaussian
//! bandwidth per point calibrated so that the conditional row has the
//! target perplexity, then `p_ij = (p_{j|i} + p_{i|j}) / 2n`. Pairs outside
//! every neighbourhood get exactly zero affinity.

mod neighbors;

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

pub use neighbors::{find_neighbors, NeighborGraph, NeighborMode, RpForest, RpForestParams};

use crate::data::DataMatrix;
use crate::error::{invalid_arg, invalid_input, Result};
use crate::math;
use crate::par::{map_range, Execution};

const MAX_BISECTION_STEPS: usize = 200;
const PERPLEXITY_RTOL: f64 = 1e-5;

/// Result of calibrating one point's Gaussian bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub sigma: f64,
    /// `p_{j|i}` over the supplied neighbours, summing to one.
    pub row: Vec<f64>,
    /// Perplexity actually reached by `row`.
    pub perplexity: f64,
    /// False when the target could not be reached within tolerance.
    pub converged: bool,
}

/// Gaussian row for squared distances already shifted by their minimum;
/// returns `(row, perplexity)`.
fn gaussian_row(shifted_d2: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let mut row: Vec<f64> = shifted_d2.iter().map(|&s| math::exp(-beta * s)).collect();
    let total: f64 = row.iter().sum();
    let mut weighted = 0.0;
    for (p, &s) in row.iter_mut().zip(shifted_d2) {
        *p /= total;
        weighted += *p * s;
    }
    // H = ln(total) + beta * E[s]
    let entropy = math::ln(total) + beta * weighted;
    (row, math::exp(entropy))
}

/// Finds `σ_i` such that the row `p_{j|i} ∝ exp(−d_j²/2σ²)` has the target
/// perplexity, by bisection on `log σ` within `[1e-10, 1e4] · max d`.
///
/// `distances` are Euclidean distances to the neighbours. Targets that
/// cannot be met (ties, fewer distinct distances than needed) do not fail:
/// the closest boundary solution comes back with `converged == false`.
pub fn calibrate_bandwidth(distances: &[f64], perplexity: f64) -> Result<Calibration> {
    let k = distances.len();
    if k == 0 {
        return Err(invalid_arg!("cannot calibrate an empty neighbour row"));
    }
    if !(perplexity.is_finite() && perplexity > 0.0 && perplexity <= k as f64) {
        return Err(invalid_arg!(
            "perplexity must lie in (0, {k}] for {k} neighbours, got {perplexity}"
        ));
    }
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(invalid_input!(
            "distances must be finite and non-negative, got {d}"
        ));
    }

    let d_max = distances.iter().copied().fold(0.0, f64::max);
    if d_max == 0.0 {
        // every neighbour is a duplicate: only the uniform row makes sense
        return Ok(Calibration {
            sigma: 1.0,
            row: vec![1.0 / k as f64; k],
            perplexity: k as f64,
            converged: false,
        });
    }

    let d2: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = d2.iter().map(|v| v - d2_min).collect();
    let tol = PERPLEXITY_RTOL * perplexity;

    let mut lo = math::ln(1e-10 * d_max);
    let mut hi = math::ln(1e4 * d_max);
    let mut best = None;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let sigma = math::exp(mid);
        let beta = 1.0 / (2.0 * sigma * sigma);
        let (row, perp) = gaussian_row(&shifted, beta);
        if math::abs(perp - perplexity) < tol {
            return Ok(Calibration {
                sigma,
                row,
                perplexity: perp,
                converged: true,
            });
        }
        if perp > perplexity {
            hi = mid;
        } else {
            lo = mid;
        }
        best = Some((sigma, row, perp));
    }
    let (sigma, row, perp) = best.expect("at least one bisection step");
    Ok(Calibration {
        sigma,
        row,
        perplexity: perp,
        converged: false,
    })
}

/// Calibrated conditional affinities `p_{j|i}` on a neighbour graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalAffinity {
    pub graph: NeighborGraph,
    /// Row-major `p_{j|i}`, aligned with `graph`.
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Perplexity reached per row.
    pub perplexities: Vec<f64>,
    /// Perplexity every row was calibrated towards.
    pub target_perplexity: f64,
    pub warnings: Vec<String>,
}

impl ConditionalAffinity {
    pub fn n_points(&self) -> usize {
        self.sigmas.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.graph.k();
        &self.values[i * k..(i + 1) * k]
    }
}

/// Number of neighbours used for a given perplexity: `3⌈perplexity⌉`,
/// capped at `n − 1`.
pub fn neighbor_count(perplexity: f64, n: usize) -> usize {
    let k = 3 * math::ceil(perplexity) as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

pub fn conditional_affinities(
    data: &DataMatrix,
    perplexity: f64,
    mode: NeighborMode,
    seed: u64,
    exec: Execution,
) -> Result<ConditionalAffinity> {
    if !(perplexity.is_finite() && perplexity > 0.0) {
        return Err(invalid_arg!(
            "perplexity must be positive, got {perplexity}"
        ));
    }
    let n = data.n_rows();
    let k = neighbor_count(perplexity, n);
    let mut warnings = Vec::new();
    if 3 * (math::ceil(perplexity) as usize) > k {
        warnings.push(format!(
            "perplexity {perplexity} needs {} neighbours but only {k} exist; using {k}",
            3 * math::ceil(perplexity) as usize
        ));
    }
    let target = perplexity.min(k as f64);
    if target < perplexity {
        warnings.push(format!("perplexity lowered from {perplexity} to {target}"));
    }

    let graph = find_neighbors(data, k, mode, seed, exec)?;
    let rows = map_range(n, exec, |i| calibrate_bandwidth(graph.distances(i), target));

    let mut values = Vec::with_capacity(n * k);
    let mut sigmas = Vec::with_capacity(n);
    let mut perplexities = Vec::with_capacity(n);
    let mut unconverged = 0usize;
    for row in rows {
        let row = row?;
        if !row.converged && math::abs(row.perplexity - target) > PERPLEXITY_RTOL * target {
            unconverged += 1;
        }
        values.extend_from_slice(&row.row);
        sigmas.push(row.sigma);
        perplexities.push(row.perplexity);
    }
    if unconverged > 0 {
        warnings.push(format!(
            "{unconverged} of {n} points could not be calibrated to perplexity {target}"
        ));
    }
    Ok(ConditionalAffinity {
        graph,
        values,
        sigmas,
        perplexities,
        target_perplexity: target,
        warnings,
    })
}

/// Symmetric sparse affinity matrix in CSR form, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAffinity {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseAffinity {
    /// Builds from unordered pairs `(i, j, p_ij)` with `i != j`; each pair is
    /// stored in both directions. Duplicate pairs are summed.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(pairs.len());
        for &(i, j, v) in pairs {
            if i >= n || j >= n {
                return Err(invalid_arg!("pair ({i}, {j}) out of range for n = {n}"));
            }
            if i == j {
                return Err(invalid_input!("self-affinity at {i}"));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid_input!("affinity ({i}, {j}) = {v}"));
            }
            entries.push((i.min(j), i.max(j), v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        Ok(Self::from_upper(n, &merged))
    }

    fn from_upper(n: usize, upper: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in upper {
            counts[i + 1] += 1;
            counts[j + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut cols = vec![0usize; row_ptr[n]];
        let mut vals = vec![0.0; row_ptr[n]];
        for &(i, j, v) in upper {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
            cols[fill[j]] = i;
            vals[fill[j]] = v;
            fill[j] += 1;
        }
        let mut out = Self {
            n,
            row_ptr,
            cols,
            vals,
        };
        out.sort_rows();
        out
    }

    fn sort_rows(&mut self) {
        for i in 0..self.n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut row: Vec<(usize, f64)> = self.cols[s..e]
                .iter()
                .copied()
                .zip(self.vals[s..e].iter().copied())
                .collect();
            row.sort_by_key(|r| r.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                self.cols[s + k] = c;
                self.vals[s + k] = v;
            }
        }
    }

    /// Dense symmetric `n × n` matrix, row-major; the diagonal is ignored
    /// and zeros are dropped.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(invalid_arg!("dense matrix must have {} entries", n * n));
        }
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (dense[i * n + j], dense[j * n + i]);
                if a != b {
                    return Err(invalid_input!("dense affinity not symmetric at ({i}, {j})"));
                }
                if a != 0.0 {
                    pairs.push((i, j, a));
                }
            }
        }
        Self::from_pairs(n, &pairs)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries, counting both `(i, j)` and `(j, i)`.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e]
            .iter()
            .copied()
            .zip(self.vals[s..e].iter().copied())
    }

    /// `p_ij`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&j) {
            Ok(k) => self.vals[s + k],
            Err(_) => 0.0,
        }
    }

    /// Sum over all ordered pairs.
    pub fn total(&self) -> f64 {
        self.vals.iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// `∑_{p_ij > 0} p_ij ln p_ij`
    pub fn neg_entropy(&self) -> f64 {
        self.vals
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * math::ln(p))
            .sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }
}

/// `p_ij = (p_{j|i} + p_{i|j}) / 2n`. Each unordered pair is computed once
/// and written to both triangles, so symmetry is exact.
pub fn symmetrize(cond: &ConditionalAffinity) -> SparseAffinity {
    let n = cond.n_points();
    let k = cond.graph.k();
    let mut directed: Vec<(usize, usize, f64)> = Vec::with_capacity(n * k);
    for i in 0..n {
        for (&j, &p) in cond.graph.neighbors(i).iter().zip(cond.row(i)) {
            directed.push((i.min(j), i.max(j), p));
        }
    }
    directed.sort_by_key(|e| (e.0, e.1));
    let scale = 1.0 / (2.0 * n as f64);
    let mut upper: Vec<(usize, usize, f64)> = Vec::with_capacity(directed.len());
    for e in directed {
        match upper.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => upper.push(e),
        }
    }
    for e in &mut upper {
        e.2 *= scale;
    }
    upper.retain(|e| e.2 > 0.0);
    SparseAffinity::from_upper(n, &upper)
}

/// Neighbour search, calibration and symmetrisation in one call.
pub fn build_affinities(
    data: &DataMatrix,
    perplexity: f64,
    mode: NeighborMode,
    seed: u64,
    exec: Execution,
) -> Result<SparseAffinity> {
    Ok(symmetrize(&conditional_affinities(
        data, perplexity, mode, seed, exec,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn perplexity_of(row: &[f64]) -> f64 {
        let h: f64 = row
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum();
        // exp(-ln 2 * sum p log2 p)
        (core::f64::consts::LN_2 * h).exp()
    }

    #[test]
    fn equidistant_row_is_uniform() {
        let c = calibrate_bandwidth(&[2.0; 7], 7.0).unwrap();
        assert!(c.converged);
        for p in &c.row {
            assert_relative_eq!(*p, 1.0 / 7.0, epsilon = 1e-15);
        }
        assert_relative_eq!(perplexity_of(&c.row), 7.0, max_relative = 1e-12);
    }

    #[test]
    fn two_distances_oracle_sweep() {
        // dense sweep over sigma brackets the root independently of bisection
        let dist = [1.0, 2.0];
        let perp_at = |s: f64| {
            let w: Vec<f64> = dist
                .iter()
                .map(|d: &f64| (-(d * d) / (2.0 * s * s)).exp())
                .collect();
            let t: f64 = w.iter().sum();
            let row: Vec<f64> = w.iter().map(|x| x / t).collect();
            perplexity_of(&row)
        };
        let mut bracket = None;
        let mut prev = 1e-3;
        for i in 1..200_000 {
            let s = 1e-3 + i as f64 * 1e-4;
            if perp_at(prev) <= 1.5 && perp_at(s) >= 1.5 {
                bracket = Some((prev, s));
                break;
            }
            prev = s;
        }
        let (a, b) = bracket.unwrap();
        let c = calibrate_bandwidth(&dist, 1.5).unwrap();
        assert!(c.converged);
        assert!((perplexity_of(&c.row) - 1.5).abs() < 1.5e-5);
        assert!(
            c.sigma >= a - 1e-9 && c.sigma <= b + 1e-9,
            "{} not in [{a}, {b}]",
            c.sigma
        );
    }

    #[test]
    fn ties_make_target_unattainable() {
        let c = calibrate_bandwidth(&[5.0; 20], 10.0).unwrap();
        assert!(!c.converged);
        for p in &c.row {
            assert_relative_eq!(*p, 0.05, epsilon = 1e-15);
        }
    }

    #[test]
    fn all_zero_distances_give_uniform_row() {
        let c = calibrate_bandwidth(&[0.0; 4], 2.0).unwrap();
        assert!(!c.converged);
        assert_eq!(c.row, vec![0.25; 4]);
    }

    #[test]
    fn zero_distance_among_others_is_fine() {
        let c = calibrate_bandwidth(&[0.0, 1.0, 1.5, 2.0, 3.0], 3.0).unwrap();
        assert!(c.converged);
        assert!((perplexity_of(&c.row) - 3.0).abs() < 3e-5);
    }

    #[test]
    fn calibration_rejects_bad_arguments() {
        assert!(calibrate_bandwidth(&[], 1.0).is_err());
        assert!(calibrate_bandwidth(&[1.0, 2.0], 0.0).is_err());
        assert!(calibrate_bandwidth(&[1.0, 2.0], 3.0).is_err());
        assert!(calibrate_bandwidth(&[1.0, f64::NAN], 1.5).is_err());
        assert!(calibrate_bandwidth(&[1.0, -2.0], 1.5).is_err());
    }

    #[test]
    fn two_points_share_all_mass() {
        let data = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let p =
            build_affinities(&data, 30.0, NeighborMode::Exact, 0, Execution::Sequential).unwrap();
        assert_eq!(p.get(0, 1), 0.5);
        assert_eq!(p.get(1, 0), 0.5);
        assert_eq!(p.total(), 1.0);
    }

    fn gaussian(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..n * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        DataMatrix::new(n, d, v).unwrap()
    }

    #[test]
    fn built_matrix_is_normalized_and_symmetric() {
        let data = gaussian(400, 5, 3);
        let cond = conditional_affinities(&data, 20.0, NeighborMode::Exact, 0, Execution::Parallel)
            .unwrap();
        assert_eq!(cond.graph.k(), 60);
        for i in 0..400 {
            let s: f64 = cond.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!((perplexity_of(cond.row(i)) - 20.0).abs() < 20.0 * 1e-5);
        }
        let p = symmetrize(&cond);
        assert!((p.total() - 1.0).abs() < 1e-9);
        assert!(p.is_symmetric());
        assert!((0..400).all(|i| p.get(i, i) == 0.0));
    }

    #[test]
    fn permutation_equivariance() {
        let data = gaussian(120, 3, 8);
        let perm: Vec<usize> = (0..120).map(|i| (i * 37 + 5) % 120).collect();
        let permuted = data.select_rows(&perm).unwrap();
        let p =
            build_affinities(&data, 10.0, NeighborMode::Exact, 0, Execution::Sequential).unwrap();
        let q = build_affinities(
            &permuted,
            10.0,
            NeighborMode::Exact,
            0,
            Execution::Sequential,
        )
        .unwrap();
        for a in 0..120 {
            for b in 0..120 {
                assert_relative_eq!(q.get(a, b), p.get(perm[a], perm[b]), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn from_dense_roundtrip() {
        let dense = [0.0, 0.2, 0.3, 0.2, 0.0, 0.0, 0.3, 0.0, 0.0];
        let p = SparseAffinity::from_dense(3, &dense).unwrap();
        assert_eq!(p.nnz(), 4);
        assert_eq!(p.to_dense(), dense.to_vec());
        assert!(SparseAffinity::from_dense(2, &[0.0, 0.1, 0.2, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn perplexity_nondecreasing_in_sigma(
            mut dists in proptest::collection::vec(0.01f64..10.0, 2..40),
            s0 in 0.01f64..5.0,
            ratio in 1.0f64..4.0,
        ) {
            dists.sort_by(f64::total_cmp);
            let perp = |s: f64| {
                let d2: Vec<f64> = dists.iter().map(|d| d * d).collect();
                let m = d2[0];
                let shifted: Vec<f64> = d2.iter().map(|v| v - m).collect();
                gaussian_row(&shifted, 1.0 / (2.0 * s * s)).1
            };
            prop_assert!(perp(s0 * ratio) >= perp(s0) * (1.0 - 1e-12));
        }

        #[test]
        fn calibration_hits_target(
            dists in proptest::collection::vec(0.01f64..10.0, 5..60),
            frac in 0.05f64..0.9,
        ) {
            let mut distinct = dists.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assume!(distinct.len() == dists.len());
            let target = 1.0 + frac * (dists.len() as f64 - 1.0) * 0.8;
            let c = calibrate_bandwidth(&dists, target).unwrap();
            prop_assert!(c.converged);
            prop_assert!((perplexity_of(&c.row) - target).abs() < 1e-5 * target * 1.0001);
            prop_assert!((c.row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
