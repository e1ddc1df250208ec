//! Loss and gradient of the embedding objective.
//!
//! With `w_ij = k(‖y_i − y_j‖)`, `Z = ∑_{k≠l} w_kl` and `q_ij = w_ij / Z`,
//! the gradient of `KL(P ‖ Q)` splits into
//!
//! ```text
//! F_att,i =  4 ∑_j p_ij · w_ij^(1/α)     · (y_i − y_j)
//! F_rep,i = −4 ∑_j w_ij^((α+1)/α) / Z · (y_i − y_j)
//! ```
//!
//! The attractive part runs over the sparse affinity graph. The repulsive
//! part runs over all pairs, either exactly in O(n²) or through the
//! grid interpolation in [`interp`]. The factor 4 is kept here; the
//! optimiser divides its learning rate by 4 instead.

pub mod interp;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use interp::{repulsive_forces_interp, InterpConfig};

use crate::affinity::SparseAffinity;
use crate::data::Embedding;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelParams};
use crate::math;
use crate::par::{map_range, Execution};

/// How the repulsive forces (and `Z`) are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// O(n²) pairwise sums.
    #[default]
    Exact,
    /// Polynomial interpolation on a grid with FFT convolution.
    Accelerated,
}

/// Source of the normalisation `Z` when evaluating the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZMode {
    Exact,
    Interp(InterpConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    pub attractive: Vec<[f64; 2]>,
    pub repulsive: Vec<[f64; 2]>,
    /// `∑_{k≠l} w_kl`
    pub z: f64,
    pub loss: Option<f64>,
}

impl ForceField {
    /// `exaggeration · F_att + F_rep`
    pub fn gradient(&self, exaggeration: f64) -> Vec<[f64; 2]> {
        self.attractive
            .iter()
            .zip(&self.repulsive)
            .map(|(a, r)| [exaggeration * a[0] + r[0], exaggeration * a[1] + r[1]])
            .collect()
    }
}

fn check_shapes(emb: &Embedding, p: &SparseAffinity) -> Result<()> {
    if emb.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: emb.len(),
        });
    }
    Ok(())
}

pub(crate) fn attractive_with(
    emb: &Embedding,
    p: &SparseAffinity,
    kernel: &Kernel,
    exec: Execution,
) -> Vec<[f64; 2]> {
    let y = &emb.coords;
    map_range(y.len(), exec, |i| {
        let yi = y[i];
        let (mut fx, mut fy) = (0.0, 0.0);
        for (j, pij) in p.row(i) {
            let dx = yi[0] - y[j][0];
            let dy = yi[1] - y[j][1];
            let s = pij * kernel.base(dx * dx + dy * dy);
            fx += s * dx;
            fy += s * dy;
        }
        [4.0 * fx, 4.0 * fy]
    })
}

/// `F_att`, summed over the stored entries of `p` only.
pub fn attractive_forces(
    emb: &Embedding,
    p: &SparseAffinity,
    params: &KernelParams,
    exec: Execution,
) -> Result<Vec<[f64; 2]>> {
    check_shapes(emb, p)?;
    let kernel = params.evaluator()?;
    Ok(attractive_with(emb, p, &kernel, exec))
}

/// Per-point `(∑_j w^((α+1)/α)(y_i − y_j), ∑_j w)`, exact.
fn exact_sums(emb: &Embedding, kernel: &Kernel, exec: Execution) -> Vec<([f64; 2], f64)> {
    let y = &emb.coords;
    let n = y.len();
    map_range(n, exec, |i| {
        let yi = y[i];
        let (mut sx, mut sy, mut z) = (0.0, 0.0, 0.0);
        for (j, yj) in y.iter().enumerate() {
            if j == i {
                continue;
            }
            let dx = yi[0] - yj[0];
            let dy = yi[1] - yj[1];
            let d2 = dx * dx + dy * dy;
            let b = kernel.base(d2);
            let w = kernel.weight_with_base(d2, b);
            let r = w * b;
            sx += r * dx;
            sy += r * dy;
            z += w;
        }
        ([sx, sy], z)
    })
}

pub(crate) fn repulsive_exact_with(
    emb: &Embedding,
    kernel: &Kernel,
    exec: Execution,
) -> (Vec<[f64; 2]>, f64) {
    let sums = exact_sums(emb, kernel, exec);
    let z: f64 = sums.iter().map(|s| s.1).sum();
    let c = -4.0 / z;
    let forces = sums.iter().map(|(s, _)| [c * s[0], c * s[1]]).collect();
    (forces, z)
}

/// `F_rep` and `Z` by the O(n²) pairwise loop.
pub fn repulsive_forces_exact(
    emb: &Embedding,
    params: &KernelParams,
    exec: Execution,
) -> Result<(Vec<[f64; 2]>, f64)> {
    if emb.len() < 2 {
        return Err(crate::error::invalid_arg!("need at least two points"));
    }
    if !emb.is_finite() {
        return Err(crate::error::invalid_input!(
            "embedding has non-finite coordinates"
        ));
    }
    let kernel = params.evaluator()?;
    Ok(repulsive_exact_with(emb, &kernel, exec))
}

/// Exact `Z = ∑_{k≠l} w_kl`.
pub fn z_exact(emb: &Embedding, params: &KernelParams, exec: Execution) -> Result<f64> {
    let kernel = params.evaluator()?;
    let y = &emb.coords;
    let rows = map_range(y.len(), exec, |i| {
        let yi = y[i];
        let mut z = 0.0;
        for (j, yj) in y.iter().enumerate() {
            if j != i {
                let dx = yi[0] - yj[0];
                let dy = yi[1] - yj[1];
                z += kernel.weight(dx * dx + dy * dy);
            }
        }
        z
    });
    Ok(rows.iter().sum())
}

/// `∑ p_ij (ln p_ij − ln w_ij) + ln Z · ∑ p_ij` over stored entries.
pub(crate) fn kl_with_z(emb: &Embedding, p: &SparseAffinity, kernel: &Kernel, z: f64) -> f64 {
    let ln_z = math::ln(z);
    let mut total = 0.0;
    for i in 0..p.n() {
        for (j, pij) in p.row(i) {
            if pij > 0.0 {
                let lw = kernel.ln_weight(emb.sq_dist(i, j));
                total += pij * (math::ln(pij) - lw + ln_z);
            }
        }
    }
    total
}

/// `KL(P ‖ Q)` including the constant `∑ p log p`.
pub fn kl_divergence(
    emb: &Embedding,
    p: &SparseAffinity,
    params: &KernelParams,
    z_mode: ZMode,
    exec: Execution,
) -> Result<f64> {
    check_shapes(emb, p)?;
    let kernel = params.evaluator()?;
    let z = match z_mode {
        ZMode::Exact => z_exact(emb, params, exec)?,
        ZMode::Interp(cfg) => repulsive_forces_interp(emb, params, &cfg, exec)?.1,
    };
    Ok(kl_with_z(emb, p, &kernel, z))
}

/// Both force components for the given solver, without the loss.
pub fn forces(
    emb: &Embedding,
    p: &SparseAffinity,
    params: &KernelParams,
    solver: Solver,
    interp: &InterpConfig,
    exec: Execution,
) -> Result<ForceField> {
    check_shapes(emb, p)?;
    let kernel = params.evaluator()?;
    Ok(forces_with(emb, p, &kernel, solver, interp, exec))
}

pub(crate) fn forces_with(
    emb: &Embedding,
    p: &SparseAffinity,
    kernel: &Kernel,
    solver: Solver,
    interp: &InterpConfig,
    exec: Execution,
) -> ForceField {
    let attractive = attractive_with(emb, p, kernel, exec);
    let (repulsive, z) = match solver {
        Solver::Exact => repulsive_exact_with(emb, kernel, exec),
        Solver::Accelerated => interp::repulsive_interp_with(emb, kernel, interp, exec),
    };
    ForceField {
        attractive,
        repulsive,
        z,
        loss: None,
    }
}
