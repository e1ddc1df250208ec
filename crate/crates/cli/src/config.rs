//! Run configuration: presets, JSON files and validation.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use htsne_core::affinity::NeighborMode;
use htsne_core::experiments::InitMode;
use htsne_core::gradient::{InterpConfig, Solver};
use htsne_core::metrics::{ADAPTIVE_MIN_PTS, DBSCAN_DEFAULT_EPS, DBSCAN_DEFAULT_MIN_PTS};
use htsne_core::optimizer::OptimizerConfig;
use htsne_core::{Execution, KernelParams, KernelVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Csv,
    Idx,
}

/// Built-in data sets that need no input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Synthetic {
    /// Ten 10-D Gaussian classes, 100 points each.
    Toy10,
    /// The ten classes each split into two halves along an extra axis.
    Dumbbells,
    /// Two 10-D Gaussian clusters, 100 points each.
    TwoClusters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Mnist,
    Toy10,
    Dumbbells,
    TwoClusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Data file, or for IDX input a directory holding the MNIST files.
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    /// IDX label file when `input` is a single image file.
    pub labels: Option<PathBuf>,
    /// Generated data used when `input` is absent.
    pub synthetic: Option<Synthetic>,
    /// Seed for the synthetic generator.
    pub data_seed: u64,
    /// Random subsample of this many points before anything else.
    pub subsample: Option<usize>,

    pub alpha: f64,
    pub variant: KernelVariant,
    pub perplexity: f64,
    /// `None` uses the exact solver up to 2000 points.
    pub solver: Option<Solver>,
    /// `None` uses exact neighbours up to 10 000 points.
    pub neighbors: Option<NeighborMode>,
    pub interp: InterpConfig,

    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub early_exaggeration_length: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    pub late_exaggeration: f64,
    pub seed: u64,

    pub init: InitMode,
    /// PCA pre-reduction of the input to this many dimensions.
    pub pca_dims: Option<usize>,

    /// One run per value instead of a single run at `alpha`.
    pub sweep_alphas: Option<Vec<f64>>,
    /// k values for k-NN preservation.
    pub metrics: Vec<usize>,
    /// Radius of the fixed-eps DBSCAN count reported next to the adaptive one.
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub adaptive_min_pts: usize,

    pub execution: Execution,
    pub out: PathBuf,
}

pub const AUTO_EXACT_NEIGHBORS: usize = 10_000;

impl Default for RunConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        Self {
            input: None,
            format: InputFormat::Csv,
            labels: None,
            synthetic: None,
            data_seed: 0,
            subsample: None,
            alpha: 1.0,
            variant: KernelVariant::Simplified,
            perplexity: 30.0,
            solver: None,
            neighbors: None,
            interp: InterpConfig::default(),
            iterations: opt.iterations,
            learning_rate: opt.learning_rate,
            early_exaggeration: opt.early_exaggeration,
            early_exaggeration_length: opt.early_exaggeration_length,
            momentum_initial: opt.momentum_initial,
            momentum_final: opt.momentum_final,
            momentum_switch_iter: opt.momentum_switch_iter,
            late_exaggeration: opt.late_exaggeration,
            seed: opt.seed,
            init: InitMode::Pca,
            pca_dims: None,
            sweep_alphas: None,
            metrics: vec![10],
            dbscan_eps: DBSCAN_DEFAULT_EPS,
            dbscan_min_pts: DBSCAN_DEFAULT_MIN_PTS,
            adaptive_min_pts: ADAPTIVE_MIN_PTS,
            execution: Execution::Parallel,
            out: PathBuf::from("htsne-out"),
        }
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let base = Self::default();
        match p {
            Preset::Mnist => {
                let mut cfg = Self {
                    format: InputFormat::Idx,
                    perplexity: 50.0,
                    init: InitMode::Pca,
                    pca_dims: Some(50),
                    metrics: vec![10, 50, 100],
                    ..base
                };
                cfg.set_optimizer(&OptimizerConfig::mnist());
                cfg
            }
            Preset::Toy10 => Self {
                synthetic: Some(Synthetic::Toy10),
                perplexity: 50.0,
                ..base
            },
            Preset::Dumbbells => Self {
                synthetic: Some(Synthetic::Dumbbells),
                perplexity: 50.0,
                ..base
            },
            Preset::TwoClusters => Self {
                synthetic: Some(Synthetic::TwoClusters),
                perplexity: 50.0,
                solver: Some(Solver::Exact),
                ..base
            },
        }
    }

    pub fn from_json_file(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            early_exaggeration: self.early_exaggeration,
            early_exaggeration_length: self.early_exaggeration_length,
            momentum_initial: self.momentum_initial,
            momentum_final: self.momentum_final,
            momentum_switch_iter: self.momentum_switch_iter,
            late_exaggeration: self.late_exaggeration,
            seed: self.seed,
        }
    }

    pub fn set_optimizer(&mut self, o: &OptimizerConfig) {
        self.iterations = o.iterations;
        self.learning_rate = o.learning_rate;
        self.early_exaggeration = o.early_exaggeration;
        self.early_exaggeration_length = o.early_exaggeration_length;
        self.momentum_initial = o.momentum_initial;
        self.momentum_final = o.momentum_final;
        self.momentum_switch_iter = o.momentum_switch_iter;
        self.late_exaggeration = o.late_exaggeration;
        self.seed = o.seed;
    }

    pub fn kernel(&self) -> anyhow::Result<KernelParams> {
        Ok(KernelParams::new(self.alpha, self.variant)?)
    }

    pub fn solver_for(&self, n: usize) -> Solver {
        self.solver
            .unwrap_or(if n <= htsne_core::experiments::EXACT_SOLVER_LIMIT {
                Solver::Exact
            } else {
                Solver::Accelerated
            })
    }

    pub fn neighbors_for(&self, n: usize) -> NeighborMode {
        self.neighbors.unwrap_or(if n <= AUTO_EXACT_NEIGHBORS {
            NeighborMode::Exact
        } else {
            NeighborMode::Approximate
        })
    }

    /// Range and consistency checks that do not need the data.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.kernel()?;
        self.optimizer().validate()?;
        self.interp.validate()?;
        ensure!(
            self.perplexity.is_finite() && self.perplexity > 0.0,
            "perplexity must be positive, got {}",
            self.perplexity
        );
        ensure!(self.iterations > 0, "iterations must be positive");
        if let Some(d) = self.pca_dims {
            ensure!(d >= 2, "pca_dims must be at least 2, got {d}");
        }
        if let Some(s) = self.subsample {
            ensure!(s >= 2, "subsample must be at least 2, got {s}");
        }
        ensure!(
            self.dbscan_eps.is_finite() && self.dbscan_eps > 0.0,
            "dbscan_eps must be positive, got {}",
            self.dbscan_eps
        );
        ensure!(
            self.dbscan_min_pts >= 1,
            "dbscan_min_pts must be at least 1"
        );
        ensure!(
            self.adaptive_min_pts >= 1,
            "adaptive_min_pts must be at least 1"
        );
        ensure!(
            self.metrics.iter().all(|&k| k >= 1),
            "metric k values must be positive"
        );
        if let Some(alphas) = &self.sweep_alphas {
            ensure!(!alphas.is_empty(), "sweep_alphas is empty");
            for &a in alphas {
                KernelParams::new(a, KernelVariant::Simplified)?;
            }
            ensure!(
                self.variant == KernelVariant::Simplified,
                "alpha sweeps use the simplified kernel"
            );
        }
        match (&self.input, self.synthetic) {
            (None, None) => bail!("no input: give --input or a synthetic preset"),
            (Some(_), Some(_)) => bail!("both an input file and a synthetic data set were given"),
            _ => {}
        }
        if self.format == InputFormat::Csv && self.labels.is_some() {
            bail!("--labels applies to IDX input; CSV labels go in a final column named \"label\"");
        }
        Ok(())
    }
}

/// `a:b:step` (inclusive of `b` up to rounding) or a comma-separated list.
pub fn parse_alpha_list(s: &str) -> anyhow::Result<Vec<f64>> {
    let parse = |t: &str| -> anyhow::Result<f64> {
        t.trim()
            .parse::<f64>()
            .with_context(|| format!("invalid number {t:?} in alpha list"))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        ensure!(
            parts.len() == 3,
            "alpha range must be start:stop:step, got {s:?}"
        );
        let (a, b, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        ensure!(
            step > 0.0 && step.is_finite(),
            "alpha step must be positive, got {step}"
        );
        ensure!(b >= a, "alpha range stop {b} is below start {a}");
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        ensure!(count <= 100_000, "alpha range has {count} values");
        // multiply rather than accumulate so 0.2:3.0:0.2 ends exactly at 3.0
        Ok((0..count)
            .map(|i| round_decimal(a + i as f64 * step))
            .collect())
    } else {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(parse)
            .collect()
    }
}

fn round_decimal(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

pub fn parse_usize_list(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid integer {t:?}"))
        })
        .collect()
}
