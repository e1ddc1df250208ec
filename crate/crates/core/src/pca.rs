//! Principal component analysis.
//!
//! Up to [`DENSE_LIMIT`] features the covariance matrix is diagonalised
//! directly; above it a randomized subspace iteration is used.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{invalid_arg, Result};

pub const DENSE_LIMIT: usize = 1000;

/// Relative eigenvalue below which a component counts as absent.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-norm principal directions, most variance first.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component (`n − 1` denominator).
    pub variances: Vec<f64>,
}

fn centered(data: &DataMatrix) -> (DMatrix<f64>, Vec<f64>) {
    let (n, d) = (data.n_rows(), data.n_cols());
    let mut mean = alloc::vec![0.0; d];
    for row in data.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let x = DMatrix::from_fn(n, d, |i, j| data.row(i)[j] - mean[j]);
    (x, mean)
}

/// Flip so the largest-magnitude loading is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if crate::math::abs(x) > best {
            best = crate::math::abs(x);
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    for x in v.iter_mut() {
        *x *= sign;
    }
}

impl Pca {
    pub fn fit(data: &DataMatrix, k: usize, seed: u64) -> Result<Self> {
        let (n, d) = (data.n_rows(), data.n_cols());
        if k == 0 || k > n.min(d) {
            return Err(invalid_arg!(
                "number of components must be in 1..={}, got {k}",
                n.min(d)
            ));
        }
        let (x, mean) = centered(data);
        let denom = (n - 1) as f64;
        let (values, vectors) = if d <= DENSE_LIMIT {
            let cov = (x.transpose() * &x) / denom;
            let eig = SymmetricEigen::new(cov);
            (
                eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
                eig.eigenvectors,
            )
        } else {
            randomized_eigen(&x, k, denom, seed)
        };
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut components = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        for &c in order.iter().take(k) {
            let mut v: Vec<f64> = vectors.column(c).iter().copied().collect();
            canonical_sign(&mut v);
            components.push(v);
            variances.push(values[c].max(0.0));
        }
        Ok(Self {
            mean,
            components,
            variances,
        })
    }

    /// Projection of each row onto the components, `n × k`.
    pub fn transform(&self, data: &DataMatrix) -> Result<Vec<Vec<f64>>> {
        if data.n_cols() != self.mean.len() {
            return Err(crate::error::Error::DimensionMismatch {
                expected: self.mean.len(),
                found: data.n_cols(),
            });
        }
        Ok(data
            .rows()
            .map(|row| {
                self.components
                    .iter()
                    .map(|c| {
                        c.iter()
                            .zip(row.iter().zip(&self.mean))
                            .map(|(w, (x, m))| w * (x - m))
                            .sum()
                    })
                    .collect()
            })
            .collect())
    }
}

/// Top eigenpairs of `XᵀX / denom` by subspace iteration on `XᵀX`.
fn randomized_eigen(x: &DMatrix<f64>, k: usize, denom: f64, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
    let d = x.ncols();
    let width = (k + 10).min(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(d, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = omega.qr().q();
    for _ in 0..8 {
        let y = x.transpose() * (x * &q);
        q = y.qr().q();
    }
    let small = q.transpose() * (x.transpose() * (x * &q)) / denom;
    let eig = SymmetricEigen::new(small);
    let vectors = &q * eig.eigenvectors;
    (eig.eigenvalues.iter().copied().collect(), vectors)
}

/// Mean-centred projection onto the top `dims` principal directions.
pub fn pca_reduce(data: &DataMatrix, dims: usize, seed: u64) -> Result<DataMatrix> {
    let pca = Pca::fit(data, dims, seed)?;
    let rows = pca.transform(data)?;
    DataMatrix::from_rows(&rows)
}
