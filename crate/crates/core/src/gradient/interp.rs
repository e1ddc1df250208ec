//! Interpolation-accelerated repulsion.
//!
//! The three sums needed per point,
//!
//! ```text
//! φ_i  = ∑_j w_ij^((α+1)/α)         φ_i^y = ∑_j w_ij^((α+1)/α) · y_j
//! ψ_i  = ∑_j w_ij                    (for Z)
//! ```
//!
//! are approximated by Lagrange interpolation on a regular grid covering
//! the embedding: point charges are spread to the grid nodes of their box,
//! the node-to-node kernel sums are a 2-D Toeplitz product evaluated by FFT
//! on a circulant embedding, and the node potentials are interpolated back
//! to the points with the same weights. Cost is O(n + N² log N) for an
//! `N × N` FFT grid, independent of α.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::repulsive_exact_with;
use crate::data::Embedding;
use crate::error::{invalid_arg, invalid_input, Result};
use crate::fft::{fast_len, fft2_forward_transposed, fft2_inverse_from_transposed, Complex64, Fft};
use crate::kernel::{Kernel, KernelParams};
use crate::math;
use crate::par::{map_range, Execution};

/// Grid refinement kicks in below this α when `alpha_refinement` is set.
pub const REFINEMENT_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpConfig {
    /// Interpolation nodes per box along each axis.
    pub nodes_per_interval: usize,
    /// Minimum number of boxes per axis.
    pub min_boxes: usize,
    /// Upper bound on the box side length in embedding units.
    pub max_box_width: f64,
    /// Halve the box width for α below [`REFINEMENT_ALPHA`].
    pub alpha_refinement: bool,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            nodes_per_interval: 3,
            min_boxes: 125,
            max_box_width: 1.0,
            alpha_refinement: false,
        }
    }
}

impl InterpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_interval < 3 {
            return Err(invalid_arg!(
                "nodes_per_interval must be at least 3, got {}",
                self.nodes_per_interval
            ));
        }
        if self.min_boxes == 0 {
            return Err(invalid_arg!("min_boxes must be positive"));
        }
        if !(self.max_box_width.is_finite() && self.max_box_width > 0.0) {
            return Err(invalid_arg!(
                "max_box_width must be positive, got {}",
                self.max_box_width
            ));
        }
        Ok(())
    }

    /// Grid geometry for an embedding of side `span` under kernel `alpha`.
    pub fn layout(&self, span: f64, alpha: f64) -> GridLayout {
        let p = self.nodes_per_interval;
        let mut boxes = self
            .min_boxes
            .max(math::ceil(span / self.max_box_width) as usize);
        if self.alpha_refinement && alpha < REFINEMENT_ALPHA {
            boxes *= 2;
        }
        let fft_len = fast_len(2 * p * boxes);
        // the FFT length is fixed now; fill it with as many boxes as fit
        let boxes = fft_len / (2 * p);
        GridLayout {
            boxes,
            nodes_per_box: p,
            fft_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub boxes: usize,
    pub nodes_per_box: usize,
    /// Circulant embedding size; at least twice the node count per axis.
    pub fft_len: usize,
}

impl GridLayout {
    #[inline]
    pub fn nodes(&self) -> usize {
        self.boxes * self.nodes_per_box
    }
}

/// `F_rep` and `Z` via grid interpolation. All-coincident embeddings fall
/// back to the exact sums.
pub fn repulsive_forces_interp(
    emb: &Embedding,
    params: &KernelParams,
    cfg: &InterpConfig,
    exec: Execution,
) -> Result<(Vec<[f64; 2]>, f64)> {
    if emb.len() < 2 {
        return Err(invalid_arg!("need at least two points"));
    }
    if !emb.is_finite() {
        return Err(invalid_input!("embedding has non-finite coordinates"));
    }
    cfg.validate()?;
    let kernel = params.evaluator()?;
    Ok(repulsive_interp_with(emb, &kernel, cfg, exec))
}

/// Lagrange basis values at `t ∈ [0, 1]` for nodes `(j + ½)/p`.
#[inline]
fn lagrange(t: f64, nodes: &[f64], denoms: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let mut num = 1.0;
        for (k, &x) in nodes.iter().enumerate() {
            if k != j {
                num *= t - x;
            }
        }
        *o = num / denoms[j];
    }
}

pub(crate) fn repulsive_interp_with(
    emb: &Embedding,
    kernel: &Kernel,
    cfg: &InterpConfig,
    exec: Execution,
) -> (Vec<[f64; 2]>, f64) {
    let y = &emb.coords;
    let n = y.len();
    let (lo, hi) = emb.bounds();
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if !(span > 0.0) {
        return repulsive_exact_with(emb, kernel, exec);
    }

    let layout = cfg.layout(span, kernel.alpha());
    let p = layout.nodes_per_box;
    let boxes = layout.boxes;
    let m = layout.nodes();
    let big_n = layout.fft_len;
    let box_width = span / boxes as f64;
    let h = box_width / p as f64;

    let nodes: Vec<f64> = (0..p).map(|j| (j as f64 + 0.5) / p as f64).collect();
    let denoms: Vec<f64> = (0..p)
        .map(|j| {
            (0..p)
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product()
        })
        .collect();

    // box index and interpolation weights per point, in local coordinates
    let placement: Vec<([usize; 2], [f64; 2], Vec<f64>)> = map_range(n, exec, |i| {
        let u = [y[i][0] - lo[0], y[i][1] - lo[1]];
        let mut w = vec![0.0; 2 * p];
        let mut b = [0usize; 2];
        for a in 0..2 {
            let s = u[a] / box_width;
            let idx = (math::floor(s).max(0.0) as usize).min(boxes - 1);
            b[a] = idx;
            lagrange(s - idx as f64, &nodes, &denoms, &mut w[a * p..(a + 1) * p]);
        }
        (b, u, w)
    });

    // kernel grids: re = w^((α+1)/α), im = w; even in both axes so the
    // spectra of both parts are real
    let fft = Fft::new(big_n);
    let zero = Complex64::new(0.0, 0.0);
    let mut kgrid = vec![zero; big_n * big_n];
    let quarter: Vec<Complex64> = map_range(m * m, exec, |idx| {
        let (r, c) = (idx / m, idx % m);
        let d2 = ((r * r + c * c) as f64) * h * h;
        let b = kernel.base(d2);
        let w = kernel.weight_with_base(d2, b);
        Complex64::new(w * b, w)
    });
    for r in 0..m {
        for c in 0..m {
            let v = quarter[r * m + c];
            let rs = [r, (big_n - r) % big_n];
            let cs = [c, (big_n - c) % big_n];
            for &rr in &rs {
                for &cc in &cs {
                    kgrid[rr * big_n + cc] = v;
                }
            }
        }
    }
    let kspec = fft2_forward_transposed(&fft, &mut kgrid, big_n, exec);
    drop(kgrid);

    // charges: a = 1 + i·u_x, b = u_y + i·1; grid rows index y nodes
    let mut ga = vec![zero; big_n * big_n];
    let mut gb = vec![zero; big_n * big_n];
    for (b, u, w) in &placement {
        let (wx, wy) = (&w[..p], &w[p..]);
        let ca = Complex64::new(1.0, u[0]);
        let cb = Complex64::new(u[1], 1.0);
        for ry in 0..p {
            let row = (b[1] * p + ry) * big_n + b[0] * p;
            for cx in 0..p {
                let wt = wy[ry] * wx[cx];
                ga[row + cx] += ca * wt;
                gb[row + cx] += cb * wt;
            }
        }
    }
    let mut sa = fft2_forward_transposed(&fft, &mut ga, m, exec);
    let sb = fft2_forward_transposed(&fft, &mut gb, m, exec);
    drop(ga);
    drop(gb);

    // out1 = K_rep * (1 + i u_x); out2 = K_rep * u_y + i K_z * 1
    let mut s2 = vec![zero; big_n * big_n];
    let half_i = Complex64::new(0.0, -0.5);
    for kx in 0..big_n {
        let nkx = (big_n - kx) % big_n;
        for ky in 0..big_n {
            let idx = kx * big_n + ky;
            let nidx = nkx * big_n + (big_n - ky) % big_n;
            let k_rep = kspec[idx].re;
            let k_z = kspec[idx].im;
            sa[idx] *= k_rep;
            let conj_neg = sb[nidx].conj();
            let spec_uy = (sb[idx] + conj_neg) * 0.5;
            let spec_one = (sb[idx] - conj_neg) * half_i;
            s2[idx] = spec_uy * k_rep + Complex64::new(0.0, 1.0) * spec_one * k_z;
        }
    }
    drop(sb);
    let out1 = fft2_inverse_from_transposed(&fft, &mut sa, m, exec);
    let out2 = fft2_inverse_from_transposed(&fft, &mut s2, m, exec);

    let sums: Vec<([f64; 2], f64)> = map_range(n, exec, |i| {
        let (b, u, w) = &placement[i];
        let (wx, wy) = (&w[..p], &w[p..]);
        let (mut phi, mut phx, mut phy, mut psi) = (0.0, 0.0, 0.0, 0.0);
        for ry in 0..p {
            let row = (b[1] * p + ry) * big_n + b[0] * p;
            for cx in 0..p {
                let wt = wy[ry] * wx[cx];
                let o1 = out1[row + cx];
                let o2 = out2[row + cx];
                phi += wt * o1.re;
                phx += wt * o1.im;
                phy += wt * o2.re;
                psi += wt * o2.im;
            }
        }
        // the j = i term contributes u_i - u_i = 0 to the force and k(0) = 1 to ψ
        ([u[0] * phi - phx, u[1] * phi - phy], psi - 1.0)
    });
    let z: f64 = sums.iter().map(|s| s.1).sum();
    let c = -4.0 / z;
    let forces = sums.iter().map(|(s, _)| [c * s[0], c * s[1]]).collect();
    (forces, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blob(n: usize, sd: f64, seed: u64) -> Embedding {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Embedding::new(
            (0..n)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    let y: f64 = StandardNormal.sample(&mut rng);
                    [sd * x, sd * y]
                })
                .collect(),
        )
        .unwrap()
    }

    fn rel_err(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        let mut worst: f64 = 0.0;
        for axis in 0..2 {
            let scale = b.iter().map(|v| v[axis].abs()).fold(0.0, f64::max);
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x[axis] - y[axis]).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn layout_fills_transform_length() {
        let cfg = InterpConfig::default();
        let l = cfg.layout(10.0, 1.0);
        assert_eq!(l.fft_len, fast_len(2 * 3 * 125));
        assert_eq!(l.boxes, l.fft_len / 6);
        assert!(l.boxes >= 125);
        assert!(2 * l.nodes() <= l.fft_len);
        let big = cfg.layout(300.0, 1.0);
        assert!(big.boxes >= 300);
        let refined = InterpConfig {
            alpha_refinement: true,
            ..cfg
        };
        assert!(refined.layout(10.0, 0.5).boxes > l.boxes);
        assert_eq!(refined.layout(10.0, 1.0), l);
    }

    #[test]
    fn two_points_match_exact() {
        let emb = Embedding::new(vec![[0.0, 0.0], [1.5, -0.7]]).unwrap();
        for a in [0.5, 1.0, 3.0] {
            let params = KernelParams::simplified(a).unwrap();
            let (fi, zi) = repulsive_forces_interp(
                &emb,
                &params,
                &InterpConfig::default(),
                Execution::Sequential,
            )
            .unwrap();
            let (fe, ze) =
                super::super::repulsive_forces_exact(&emb, &params, Execution::Sequential).unwrap();
            assert!((zi - ze).abs() < 1e-3 * ze);
            assert!(rel_err(&fi, &fe) < 1e-2);
        }
    }

    #[test]
    fn coincident_points_fall_back_to_exact() {
        let emb = Embedding::new(vec![[2.0, 2.0]; 4]).unwrap();
        let params = KernelParams::simplified(1.0).unwrap();
        let (f, z) = repulsive_forces_interp(
            &emb,
            &params,
            &InterpConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(z, 12.0);
        assert!(f.iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn blob_matches_exact() {
        let emb = blob(1000, 5.0, 3);
        for (a, refine, tol) in [(1.0, false, 1e-2), (0.5, true, 1e-2), (2.0, false, 1e-2)] {
            let params = KernelParams::simplified(a).unwrap();
            let cfg = InterpConfig {
                alpha_refinement: refine,
                ..InterpConfig::default()
            };
            let (fi, zi) =
                repulsive_forces_interp(&emb, &params, &cfg, Execution::Parallel).unwrap();
            let (fe, ze) =
                super::super::repulsive_forces_exact(&emb, &params, Execution::Parallel).unwrap();
            let e = rel_err(&fi, &fe);
            assert!(e < tol, "alpha {a}: force error {e}");
            assert!((zi - ze).abs() < tol * ze, "alpha {a}: Z {zi} vs {ze}");
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let emb = blob(300, 3.0, 8);
        let params = KernelParams::simplified(0.7).unwrap();
        let cfg = InterpConfig::default();
        let a = repulsive_forces_interp(&emb, &params, &cfg, Execution::Sequential).unwrap();
        let b = repulsive_forces_interp(&emb, &params, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_thin_interpolation() {
        let cfg = InterpConfig {
            nodes_per_interval: 2,
            ..InterpConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
