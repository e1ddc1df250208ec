//! Gradient descent on the KL objective.
//!
//! Each iteration:
//!
//! ```text
//! g      = e(t) · F_att + F_rep
//! gain   = gain + 0.2  if sign(g) ≠ sign(Δ)   else 0.8 · gain   (floor 0.01)
//! Δ      = μ(t) · Δ − (η / 4) · gain ⊙ g
//! y      = y + Δ
//! ```
//!
//! with `e(t)` the early exaggeration for the first
//! `early_exaggeration_length` iterations and the late exaggeration
//! afterwards, and `μ(t)` switching from the initial to the final momentum
//! at `momentum_switch_iter`. The `/4` compensates for the factor 4 the
//! gradient module keeps, so learning rates mean the same as in the
//! common t-SNE implementations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::affinity::SparseAffinity;
use crate::data::{DataMatrix, Embedding};
use crate::error::{invalid_arg, Error, Result};
use crate::gradient::{forces_with, kl_with_z, z_exact, InterpConfig, Solver};
use crate::kernel::KernelParams;
use crate::math;
use crate::par::Execution;
use crate::pca::{Pca, RANK_TOLERANCE};

/// Loss is recorded every this many iterations.
pub const LOSS_TRACE_INTERVAL: usize = 50;

/// Growth of the embedding span (relative to its size at the end of early
/// exaggeration) beyond which a warning is emitted.
pub const SPAN_GROWTH_WARNING: f64 = 1e3;

pub const DEFAULT_INIT_SD: f64 = 1e-4;

const GAIN_STEP: f64 = 0.2;
const GAIN_DECAY: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub early_exaggeration_length: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    /// Multiplier on the attractive forces after early exaggeration; 1 = off.
    pub late_exaggeration: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            early_exaggeration_length: 250,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            late_exaggeration: 1.0,
            seed: 42,
        }
    }
}

impl OptimizerConfig {
    /// Defaults with η = 1000, as used for MNIST-sized data.
    pub fn mnist() -> Self {
        Self {
            learning_rate: 1000.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid_arg!("{name} must be positive, got {v}"))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("early_exaggeration", self.early_exaggeration)?;
        positive("late_exaggeration", self.late_exaggeration)?;
        for (name, m) in [
            ("momentum_initial", self.momentum_initial),
            ("momentum_final", self.momentum_final),
        ] {
            if !(0.0..1.0).contains(&m) {
                return Err(invalid_arg!("{name} must lie in [0, 1), got {m}"));
            }
        }
        if self.early_exaggeration_length > self.iterations {
            return Err(invalid_arg!(
                "early_exaggeration_length ({}) exceeds iterations ({})",
                self.early_exaggeration_length,
                self.iterations
            ));
        }
        if self.momentum_switch_iter > self.iterations {
            return Err(invalid_arg!(
                "momentum_switch_iter ({}) exceeds iterations ({})",
                self.momentum_switch_iter,
                self.iterations
            ));
        }
        Ok(())
    }
}

/// Everything needed to repeat a run from the same P and initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub kernel: KernelParams,
    pub optimizer: OptimizerConfig,
    pub interp: InterpConfig,
    pub solver: Solver,
    pub execution: Execution,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub final_embedding: Embedding,
    /// `(iteration, KL)` before the update of that iteration.
    pub loss_trace: Vec<(usize, f64)>,
    /// KL of the final embedding with an exact `Z`.
    pub final_kl: f64,
    pub wall_time_seconds: f64,
    pub config_snapshot: RunSnapshot,
    pub warnings: Vec<String>,
}

/// Passed to the progress callback.
pub struct Progress<'a> {
    pub iteration: usize,
    pub kl: f64,
    pub embedding: &'a Embedding,
}

#[inline]
fn sign(x: f64) -> i8 {
    (x > 0.0) as i8 - (x < 0.0) as i8
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    p: &SparseAffinity,
    init: &Embedding,
    params: &KernelParams,
    opt: &OptimizerConfig,
    interp: &InterpConfig,
    solver: Solver,
    exec: Execution,
) -> Result<RunReport> {
    run_with_progress(p, init, params, opt, interp, solver, exec, 0, &mut |_| {})
}

/// [`run`] with `callback` invoked every `every` iterations (never if 0).
#[allow(clippy::too_many_arguments)]
pub fn run_with_progress(
    p: &SparseAffinity,
    init: &Embedding,
    params: &KernelParams,
    opt: &OptimizerConfig,
    interp: &InterpConfig,
    solver: Solver,
    exec: Execution,
    every: usize,
    callback: &mut dyn FnMut(&Progress<'_>),
) -> Result<RunReport> {
    #[cfg(feature = "std")]
    let started = std::time::Instant::now();

    opt.validate()?;
    interp.validate()?;
    if init.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: init.len(),
        });
    }
    if init.len() < 2 {
        return Err(invalid_arg!("need at least two points"));
    }

    let (simplified, scale) = params.to_simplified();
    let kernel = simplified.evaluator()?;
    let mut warnings = Vec::new();
    if params.alpha() < 0.5 {
        warnings.push(format!(
            "alpha = {} is below 0.5; very heavy tails converge slowly and can merge clusters",
            params.alpha()
        ));
    }

    let n = init.len();
    let mut y = if scale == 1.0 {
        init.clone()
    } else {
        init.scaled(1.0 / scale)
    };
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let eta = opt.learning_rate / 4.0;
    let mut loss_trace = Vec::new();
    let mut reference_span = y.span();
    let mut span_warned = false;

    for t in 0..opt.iterations {
        let exaggeration = if t < opt.early_exaggeration_length {
            opt.early_exaggeration
        } else {
            opt.late_exaggeration
        };
        let momentum = if t < opt.momentum_switch_iter {
            opt.momentum_initial
        } else {
            opt.momentum_final
        };

        let ff = forces_with(&y, p, &kernel, solver, interp, exec);
        let trace_now = t % LOSS_TRACE_INTERVAL == 0;
        let report_now = every > 0 && t % every == 0;
        if trace_now || report_now {
            let kl = kl_with_z(&y, p, &kernel, ff.z);
            if trace_now {
                loss_trace.push((t, kl));
            }
            if report_now {
                callback(&Progress {
                    iteration: t,
                    kl,
                    embedding: &y,
                });
            }
        }

        let grad = ff.gradient(exaggeration);
        let mut max_grad = 0.0f64;
        for i in 0..n {
            for a in 0..2 {
                let g = grad[i][a];
                max_grad = max_grad.max(math::abs(g));
                let gain = &mut gains[i][a];
                if sign(g) != sign(update[i][a]) {
                    *gain += GAIN_STEP;
                } else {
                    *gain *= GAIN_DECAY;
                }
                if *gain < MIN_GAIN {
                    *gain = MIN_GAIN;
                }
                update[i][a] = momentum * update[i][a] - eta * *gain * g;
                y.coords[i][a] += update[i][a];
            }
        }
        if !y.is_finite() || !max_grad.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                max_gradient: max_grad,
            });
        }

        if t + 1 == opt.early_exaggeration_length {
            reference_span = y.span();
        }
        if !span_warned && t + 1 >= opt.early_exaggeration_length {
            let span = y.span();
            if reference_span > 0.0 && span > SPAN_GROWTH_WARNING * reference_span {
                warnings.push(format!(
                    "embedding span grew {:.0}x after early exaggeration (iteration {}); the accelerated grid grows with it",
                    span / reference_span,
                    t
                ));
                span_warned = true;
            }
        }
    }
    y.generation = init.generation + opt.iterations;

    let final_kl = kl_with_z(&y, p, &kernel, z_exact(&y, &simplified, exec)?);
    if scale != 1.0 {
        y = y.scaled(scale);
    }

    #[cfg(feature = "std")]
    let wall_time_seconds = started.elapsed().as_secs_f64();
    #[cfg(not(feature = "std"))]
    let wall_time_seconds = 0.0;

    Ok(RunReport {
        final_embedding: y,
        loss_trace,
        final_kl,
        wall_time_seconds,
        config_snapshot: RunSnapshot {
            kernel: *params,
            optimizer: *opt,
            interp: *interp,
            solver,
            execution: exec,
            n_points: n,
        },
        warnings,
    })
}

/// I.i.d. Gaussian coordinates with standard deviation `scale_sd`.
pub fn random_init(n: usize, scale_sd: f64, seed: u64) -> Result<Embedding> {
    if n < 2 {
        return Err(invalid_arg!("need at least two points, got {n}"));
    }
    if !(scale_sd.is_finite() && scale_sd > 0.0) {
        return Err(invalid_arg!("scale_sd must be positive, got {scale_sd}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            [scale_sd * x, scale_sd * y]
        })
        .collect();
    Embedding::new(coords)
}

/// First two principal components, both scaled by the factor that gives the
/// first one standard deviation `scale_sd` (population convention).
///
/// A missing component (rank < 2) is replaced by seeded Gaussian noise at
/// `scale_sd / 100`, with a warning.
pub fn pca_init(data: &DataMatrix, scale_sd: f64, seed: u64) -> Result<(Embedding, Vec<String>)> {
    if data.n_cols() < 2 {
        return Err(invalid_arg!("PCA initialisation needs at least 2 features"));
    }
    if !(scale_sd.is_finite() && scale_sd > 0.0) {
        return Err(invalid_arg!("scale_sd must be positive, got {scale_sd}"));
    }
    let n = data.n_rows();
    let pca = Pca::fit(data, 2, seed)?;
    let proj = pca.transform(data)?;
    let top = pca.variances[0];
    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = [vec![0.0; n], vec![0.0; n]];
    let mut from_noise = [false; 2];
    for c in 0..2 {
        if top > 0.0 && pca.variances[c] > RANK_TOLERANCE * top {
            for i in 0..n {
                cols[c][i] = proj[i][c];
            }
        } else {
            warnings.push(format!(
                "data has fewer than 2 non-degenerate principal components; component {} filled with noise",
                c + 1
            ));
            from_noise[c] = true;
            for v in cols[c].iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = scale_sd / 100.0 * z;
            }
        }
    }
    let mean0 = cols[0].iter().sum::<f64>() / n as f64;
    let sd0 = math::sqrt(
        cols[0]
            .iter()
            .map(|v| (v - mean0) * (v - mean0))
            .sum::<f64>()
            / n as f64,
    );
    let factor = scale_sd / sd0;
    // noise columns already sit at their target scale
    let second = if from_noise[1] && !from_noise[0] {
        1.0
    } else {
        factor
    };
    let coords = (0..n)
        .map(|i| [cols[0][i] * factor, cols[1][i] * second])
        .collect();
    Ok((Embedding::new(coords)?, warnings))
}
