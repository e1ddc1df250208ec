//! Command-line parsing and the top-level driver.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use htsne_core::affinity::NeighborMode;
use htsne_core::experiments::InitMode;
use htsne_core::gradient::Solver;
use htsne_core::optimizer::Progress;
use htsne_core::{Execution, KernelVariant};

use crate::config::{parse_alpha_list, parse_usize_list, InputFormat, Preset, RunConfig};
use crate::pipeline;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum InitArg {
    Pca,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SolverArg {
    Exact,
    Accelerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum NeighborArg {
    Exact,
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum VariantArg {
    Simplified,
    Classic,
}

/// Heavy-tailed t-SNE: embed data in two dimensions with the kernel
/// (1 + d²/α)^(−α) and report cluster structure.
///
/// Settings are layered: preset, then --config, then individual flags.
#[derive(Debug, Parser)]
#[command(name = "htsne", version)]
struct Cli {
    /// Start from a named preset.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// JSON run configuration (as written to config.json by earlier runs).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Data file, or a directory holding the four MNIST files for IDX input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// IDX label file for a single IDX image file.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Use a random subset of this many points.
    #[arg(long)]
    subsample: Option<usize>,
    /// Seed of the synthetic generators and of subsampling.
    #[arg(long)]
    data_seed: Option<u64>,

    /// Tail heaviness; 1 is standard t-SNE, smaller is heavier.
    #[arg(long)]
    alpha: Option<f64>,
    /// Kernel parametrisation; `classic` reads --alpha as (ν + 1)/2.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    early_exag: Option<f64>,
    #[arg(long)]
    early_exag_iters: Option<usize>,
    /// Attraction multiplier after early exaggeration.
    #[arg(long)]
    late_exag: Option<f64>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Reduce the input to this many principal components first.
    #[arg(long)]
    pca_dims: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    neighbors: Option<NeighborArg>,
    /// Halve the interpolation box width for α < 0.8.
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    seed: Option<u64>,

    /// α values as start:stop:step or a comma-separated list.
    #[arg(long)]
    sweep_alphas: Option<String>,
    /// k values for k-NN preservation, comma-separated.
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    dbscan_eps: Option<f64>,
    #[arg(long)]
    dbscan_min_pts: Option<usize>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-threaded execution.
    #[arg(long)]
    sequential: bool,
    /// Print progress every this many iterations (0 disables).
    #[arg(long, default_value_t = 50)]
    progress_every: usize,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn build_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match (&cli.config, cli.preset) {
        (Some(path), _) => {
            if !path.is_file() {
                return Err(usage(format!("config file not found: {}", path.display())));
            }
            RunConfig::from_json_file(path).map_err(|e| usage(format!("{e:#}")))?
        }
        (None, Some(p)) => RunConfig::preset(p),
        (None, None) => RunConfig::default(),
    };
    if cli.config.is_some() && cli.preset.is_some() {
        return Err(usage("--preset and --config cannot be combined"));
    }

    if let Some(p) = &cli.input {
        cfg.input = Some(p.clone());
        cfg.synthetic = None;
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),* $(,)?) => {
            $(if let Some(v) = cli.$flag.clone() { cfg.$field = v; })*
        };
    }
    set!(
        format => format,
        data_seed => data_seed,
        alpha => alpha,
        perplexity => perplexity,
        iterations => iterations,
        learning_rate => learning_rate,
        early_exag => early_exaggeration,
        early_exag_iters => early_exaggeration_length,
        late_exag => late_exaggeration,
        seed => seed,
        dbscan_eps => dbscan_eps,
        dbscan_min_pts => dbscan_min_pts,
        out => out,
    );
    if cli.labels.is_some() {
        cfg.labels = cli.labels.clone();
    }
    if cli.subsample.is_some() {
        cfg.subsample = cli.subsample;
    }
    if cli.pca_dims.is_some() {
        cfg.pca_dims = cli.pca_dims;
    }
    if let Some(v) = cli.variant {
        cfg.variant = match v {
            VariantArg::Simplified => KernelVariant::Simplified,
            VariantArg::Classic => KernelVariant::Classic,
        };
    }
    if let Some(i) = cli.init {
        cfg.init = match i {
            InitArg::Pca => InitMode::Pca,
            InitArg::Random => InitMode::Random,
        };
    }
    if let Some(s) = cli.solver {
        cfg.solver = Some(match s {
            SolverArg::Exact => Solver::Exact,
            SolverArg::Accelerated => Solver::Accelerated,
        });
    }
    if let Some(nb) = cli.neighbors {
        cfg.neighbors = Some(match nb {
            NeighborArg::Exact => NeighborMode::Exact,
            NeighborArg::Approximate => NeighborMode::Approximate,
        });
    }
    if cli.refine {
        cfg.interp.alpha_refinement = true;
    }
    // keep momentum switch and early exaggeration consistent with a shorter run
    if cli.iterations.is_some() {
        cfg.early_exaggeration_length = cfg.early_exaggeration_length.min(cfg.iterations);
        cfg.momentum_switch_iter = cfg.momentum_switch_iter.min(cfg.iterations);
    }
    if let Some(s) = &cli.sweep_alphas {
        cfg.sweep_alphas = Some(parse_alpha_list(s).map_err(usage)?);
    }
    if let Some(s) = &cli.metrics {
        cfg.metrics = parse_usize_list(s).map_err(usage)?;
    }
    if cli.sequential {
        cfg.execution = Execution::Sequential;
    }

    cfg.validate().map_err(|e| usage(format!("{e:#}")))?;
    if let Some(input) = &cfg.input {
        if !input.exists() {
            return Err(usage(format!("input file not found: {}", input.display())));
        }
    }
    if let Some(labels) = &cfg.labels {
        if !labels.is_file() {
            return Err(usage(format!("label file not found: {}", labels.display())));
        }
    }
    if cfg.sweep_alphas.is_some() && cfg.format == InputFormat::Idx {
        let dir_input = cfg.input.as_ref().is_some_and(|p| p.is_dir());
        if cfg.labels.is_none() && !dir_input {
            return Err(usage("an alpha sweep on IDX images needs --labels"));
        }
    }
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<(), Failure> {
    let log = |msg: &str| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    let ds = pipeline::load_dataset(cfg)?;
    log(&format!(
        "loaded {}: {} points, {} features{}",
        ds.source,
        ds.data.n_rows(),
        ds.data.n_cols(),
        if ds.labels.is_some() {
            ", labelled"
        } else {
            ""
        }
    ));
    if cfg.sweep_alphas.is_some() && ds.labels.is_none() {
        return Err(usage(
            "an alpha sweep needs class labels to measure separation",
        ));
    }

    let written = if cfg.sweep_alphas.is_some() {
        let (rows, warnings) = pipeline::run_sweep(cfg, &ds)?;
        for w in rows.iter().flat_map(|r| &r.warnings).chain(&warnings) {
            log(&format!("warning: {w}"));
        }
        if !cli.quiet {
            print!("{}", pipeline::sweep_summary(&rows));
        }
        pipeline::write_sweep(cfg, &ds, &rows, &warnings)?
    } else {
        let every = if cli.quiet { 0 } else { cli.progress_every };
        let mut progress = |p: &Progress<'_>| {
            eprintln!(
                "iteration {:>5}  KL {:.5}  span {:.2}",
                p.iteration,
                p.kl,
                p.embedding.span()
            );
        };
        let outcome = pipeline::run_single(cfg, &ds, every, &mut progress)?;
        for w in &outcome.warnings {
            log(&format!("warning: {w}"));
        }
        if !cli.quiet {
            println!(
                "{} in {:.2}s",
                pipeline::metrics_summary(&outcome.metrics),
                outcome.report.wall_time_seconds
            );
        }
        pipeline::write_single(cfg, &ds, &outcome)?
    };
    for p in written {
        log(&format!("wrote {}", p.display()));
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = build_config(&cli).and_then(|cfg| execute(&cli, &cfg));
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run with --help for usage.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}
