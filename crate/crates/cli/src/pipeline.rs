//! Loading, preprocessing, optimisation, metrics and output files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use htsne_core::affinity::{conditional_affinities, symmetrize, NeighborMode, SparseAffinity};
use htsne_core::experiments::{
    gen_dumbbells, gen_gaussian_clusters, gen_two_clusters, initial_embedding, subsample_indices,
    sweep_alpha, SweepConfig, SweepRow,
};
use htsne_core::gradient::Solver;
use htsne_core::metrics::{
    adaptive_eps, cluster_mean_profiles, dbscan, knn_preservation_many, mean_separation_ratio,
    ClusterProfile, MetricReport,
};
use htsne_core::optimizer::{run_with_progress, Progress, RunReport, RunSnapshot};
use htsne_core::pca::pca_reduce;
use htsne_core::{DataMatrix, Embedding};

use crate::config::{InputFormat, RunConfig, Synthetic};
use crate::csv_io::{format_f64, load_csv, write_embedding_csv};
use crate::idx::{is_mnist_dir, load_idx, load_mnist_dir};
use crate::svg::{emit_curve_svg, emit_image_grid, emit_svg, Series, SvgStyle};

/// Cluster mean images drawn for image data.
const MEAN_IMAGES_SHOWN: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Features as loaded, before PCA.
    pub data: DataMatrix,
    pub labels: Option<Vec<i64>>,
    /// Half-cluster ids of the dumbbell data.
    pub sub_labels: Option<Vec<i64>>,
    /// Side length when rows are square images.
    pub image_side: Option<usize>,
    pub source: String,
}

impl Dataset {
    fn select(self, idx: &[usize]) -> Result<Self> {
        let pick = |v: Option<Vec<i64>>| v.map(|v| idx.iter().map(|&i| v[i]).collect());
        Ok(Self {
            data: self.data.select_rows(idx)?,
            labels: pick(self.labels),
            sub_labels: pick(self.sub_labels),
            ..self
        })
    }
}

fn image_side(cols: usize) -> Option<usize> {
    let s = (cols as f64).sqrt().round() as usize;
    (s >= 8 && s * s == cols).then_some(s)
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let ds = match (&cfg.input, cfg.synthetic) {
        (Some(path), _) => load_file(cfg, path)?,
        (None, Some(kind)) => generate(kind, cfg.data_seed)?,
        (None, None) => bail!("no input given"),
    };
    match cfg.subsample {
        Some(m) if m < ds.data.n_rows() => {
            let idx = subsample_indices(ds.data.n_rows(), m, cfg.data_seed);
            let source = format!("{} (subsample of {m})", ds.source);
            Ok(Dataset {
                source,
                ..ds.select(&idx)?
            })
        }
        _ => Ok(ds),
    }
}

fn load_file(cfg: &RunConfig, path: &Path) -> Result<Dataset> {
    let source = path.display().to_string();
    match cfg.format {
        InputFormat::Csv => {
            let (data, labels) = load_csv(path)?
                .into_matrix()
                .map_err(|e| e.with_path(path))?;
            Ok(Dataset {
                image_side: None,
                data,
                labels,
                sub_labels: None,
                source,
            })
        }
        InputFormat::Idx => {
            let (data, labels) = if path.is_dir() {
                if !is_mnist_dir(path) {
                    bail!(
                        "{} does not contain the four MNIST IDX files",
                        path.display()
                    );
                }
                let (d, l) = load_mnist_dir(path)?;
                (d, Some(l))
            } else {
                load_idx(path, cfg.labels.as_deref())?
            };
            Ok(Dataset {
                image_side: image_side(data.n_cols()),
                data,
                labels,
                sub_labels: None,
                source,
            })
        }
    }
}

pub fn generate(kind: Synthetic, seed: u64) -> Result<Dataset> {
    let (data, labels, sub_labels, source) = match kind {
        Synthetic::Toy10 => {
            let (d, l) = gen_gaussian_clusters(100, 10, 10, 4.0, seed)?;
            (d, l, None, "toy10")
        }
        Synthetic::Dumbbells => {
            let (d, l, s) = gen_dumbbells(seed)?;
            (d, l, Some(s), "dumbbells")
        }
        Synthetic::TwoClusters => {
            let (d, l) = gen_two_clusters(seed)?;
            (d, l, None, "two-clusters")
        }
    };
    Ok(Dataset {
        data,
        labels: Some(labels),
        sub_labels,
        image_side: None,
        source: format!("{source} (seed {seed})"),
    })
}

/// Input to the affinity computation: the data, PCA-reduced if requested.
pub fn prepare(cfg: &RunConfig, ds: &Dataset, warnings: &mut Vec<String>) -> Result<DataMatrix> {
    match cfg.pca_dims {
        Some(d) if d < ds.data.n_cols() => {
            if d > ds.data.n_rows() {
                bail!(
                    "pca_dims {d} exceeds the number of points {}",
                    ds.data.n_rows()
                );
            }
            Ok(pca_reduce(&ds.data, d, cfg.seed)?)
        }
        Some(d) => {
            warnings.push(format!(
                "pca_dims {d} is not below the input dimension {}; PCA reduction skipped",
                ds.data.n_cols()
            ));
            Ok(ds.data.clone())
        }
        None => Ok(ds.data.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinitySummary {
    pub neighbor_mode: NeighborMode,
    pub target_perplexity: f64,
    pub min_row_perplexity: f64,
    pub max_row_perplexity: f64,
    pub nonzeros: usize,
    pub total: f64,
    pub symmetric: bool,
}

pub fn build_p(
    cfg: &RunConfig,
    data: &DataMatrix,
    warnings: &mut Vec<String>,
) -> Result<(SparseAffinity, AffinitySummary)> {
    let mode = cfg.neighbors_for(data.n_rows());
    let cond = conditional_affinities(data, cfg.perplexity, mode, cfg.seed, cfg.execution)?;
    warnings.extend(cond.warnings.iter().cloned());
    let fold = |f: fn(f64, f64) -> f64, init| cond.perplexities.iter().copied().fold(init, f);
    let p = symmetrize(&cond);
    let summary = AffinitySummary {
        neighbor_mode: mode,
        target_perplexity: cond.target_perplexity,
        min_row_perplexity: fold(f64::min, f64::INFINITY),
        max_row_perplexity: fold(f64::max, f64::NEG_INFINITY),
        nonzeros: p.nnz(),
        total: p.total(),
        symmetric: p.is_symmetric(),
    };
    Ok((p, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleOutcome {
    pub report: RunReport,
    pub metrics: MetricReport,
    pub affinity: AffinitySummary,
    pub profiles: Vec<ClusterProfile>,
    pub input_dims: usize,
    pub warnings: Vec<String>,
}

pub fn compute_metrics(
    cfg: &RunConfig,
    data: &DataMatrix,
    labels: Option<&[i64]>,
    emb: &Embedding,
    kl: f64,
    warnings: &mut Vec<String>,
) -> Result<MetricReport> {
    let exec = cfg.execution;
    let n = emb.len();
    let ks: Vec<usize> = cfg.metrics.iter().copied().filter(|&k| k < n).collect();
    if ks.len() < cfg.metrics.len() {
        warnings.push(format!("k-NN preservation skipped for k ≥ n = {n}"));
    }
    let knn = knn_preservation_many(data, emb, &ks, exec)?;
    let separation = match labels {
        Some(l) => match mean_separation_ratio(emb, l) {
            Ok(v) => Some(v),
            Err(e) => {
                warnings.push(format!("separation ratio not computed: {e}"));
                None
            }
        },
        None => None,
    };
    let (eps, clustering) = match adaptive_eps(emb, exec) {
        Ok(eps) => (
            Some(eps),
            Some(dbscan(emb, eps, cfg.adaptive_min_pts, exec)?),
        ),
        Err(e) => {
            warnings.push(format!("adaptive DBSCAN skipped: {e}"));
            (None, None)
        }
    };
    let fixed = dbscan(emb, cfg.dbscan_eps, cfg.dbscan_min_pts, exec)?;
    Ok(MetricReport {
        knn_preservation: ks.into_iter().zip(knn).collect(),
        kl,
        separation,
        cluster_count: clustering.as_ref().map(|c| c.cluster_count),
        dbscan_eps: eps,
        fixed_eps_cluster_count: Some(fixed.cluster_count),
        cluster_assignments: clustering.map(|c| c.assignments),
    })
}

/// One optimisation at `cfg.alpha`. `progress` is called every
/// `progress_every` iterations (never when 0).
pub fn run_single(
    cfg: &RunConfig,
    ds: &Dataset,
    progress_every: usize,
    progress: &mut dyn FnMut(&Progress<'_>),
) -> Result<SingleOutcome> {
    let mut warnings = Vec::new();
    let data = prepare(cfg, ds, &mut warnings)?;
    let (p, affinity) = build_p(cfg, &data, &mut warnings)?;
    let (init, init_warnings) = initial_embedding(&data, cfg.init, cfg.seed)?;
    warnings.extend(init_warnings);
    let report = run_with_progress(
        &p,
        &init,
        &cfg.kernel()?,
        &cfg.optimizer(),
        &cfg.interp,
        cfg.solver_for(data.n_rows()),
        cfg.execution,
        progress_every,
        progress,
    )?;
    warnings.extend(report.warnings.iter().cloned());
    let metrics = compute_metrics(
        cfg,
        &data,
        ds.labels.as_deref(),
        &report.final_embedding,
        report.final_kl,
        &mut warnings,
    )?;
    let profiles = match &metrics.cluster_assignments {
        Some(a) => cluster_mean_profiles(&ds.data, a)?,
        None => Vec::new(),
    };
    Ok(SingleOutcome {
        report,
        metrics,
        affinity,
        profiles,
        input_dims: data.n_cols(),
        warnings,
    })
}

pub fn sweep_config(cfg: &RunConfig, n: usize) -> SweepConfig {
    SweepConfig {
        perplexity: cfg.perplexity,
        optimizer: cfg.optimizer(),
        interp: cfg.interp,
        solver: Some(cfg.solver_for(n)),
        neighbor_mode: cfg.neighbors_for(n),
        init: cfg.init,
        knn_ks: cfg.metrics.iter().copied().filter(|&k| k < n).collect(),
        adaptive_min_pts: cfg.adaptive_min_pts,
        dbscan_fixed_eps: cfg.dbscan_eps,
        dbscan_min_pts: cfg.dbscan_min_pts,
    }
}

pub fn run_sweep(cfg: &RunConfig, ds: &Dataset) -> Result<(Vec<SweepRow>, Vec<String>)> {
    let alphas = cfg
        .sweep_alphas
        .as_deref()
        .context("no sweep alphas configured")?;
    let mut warnings = Vec::new();
    let data = prepare(cfg, ds, &mut warnings)?;
    let rows = sweep_alpha(
        &data,
        ds.labels.as_deref(),
        alphas,
        &sweep_config(cfg, data.n_rows()),
        cfg.execution,
    )?;
    Ok((rows, warnings))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Debug, Serialize)]
struct DatasetInfo<'a> {
    source: &'a str,
    n_points: usize,
    dims: usize,
    input_dims: usize,
    labelled: bool,
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    config: &'a RunConfig,
    snapshot: &'a RunSnapshot,
    dataset: DatasetInfo<'a>,
    affinity: &'a AffinitySummary,
    solver: Solver,
    final_kl: f64,
    wall_time_seconds: f64,
    loss_trace: &'a [(usize, f64)],
    warnings: &'a [String],
}

/// Class labels when known, DBSCAN clusters otherwise.
fn plot_labels<'a>(ds: &'a Dataset, metrics: &'a MetricReport) -> Option<&'a [i64]> {
    ds.labels
        .as_deref()
        .or(metrics.cluster_assignments.as_deref())
}

pub fn write_single(cfg: &RunConfig, ds: &Dataset, out: &SingleOutcome) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let emb = &out.report.final_embedding;
    let labels = plot_labels(ds, &out.metrics);

    let path = dir.join("embedding.csv");
    write_embedding_csv(&path, emb, labels)?;
    written.push(path);

    let path = dir.join("embedding.svg");
    let style = SvgStyle {
        title: Some(format!("alpha = {}", cfg.alpha)),
        ..SvgStyle::default()
    };
    write_text(&path, &emit_svg(emb, labels, &style))?;
    written.push(path);

    let path = dir.join("metrics.json");
    write_json(&path, &out.metrics)?;
    written.push(path);

    let path = dir.join("config.json");
    write_json(&path, cfg)?;
    written.push(path);

    let path = dir.join("report.json");
    let report = ReportFile {
        config: cfg,
        snapshot: &out.report.config_snapshot,
        dataset: DatasetInfo {
            source: &ds.source,
            n_points: ds.data.n_rows(),
            dims: ds.data.n_cols(),
            input_dims: out.input_dims,
            labelled: ds.labels.is_some(),
        },
        affinity: &out.affinity,
        solver: out.report.config_snapshot.solver,
        final_kl: out.report.final_kl,
        wall_time_seconds: out.report.wall_time_seconds,
        loss_trace: &out.report.loss_trace,
        warnings: &out.warnings,
    };
    write_json(&path, &report)?;
    written.push(path);

    if !out.profiles.is_empty() {
        let path = dir.join("clusters.csv");
        let mut text = String::from("cluster,size");
        for j in 0..ds.data.n_cols() {
            text.push_str(&format!(",mean_{j}"));
        }
        text.push('\n');
        for p in &out.profiles {
            text.push_str(&format!("{},{}", p.label, p.size));
            for v in &p.mean {
                text.push(',');
                text.push_str(&format_f64(*v));
            }
            text.push('\n');
        }
        write_text(&path, &text)?;
        written.push(path);

        if let Some(side) = ds.image_side {
            let path = dir.join("cluster_means.svg");
            let tiles: Vec<(String, Vec<f64>)> = out
                .profiles
                .iter()
                .take(MEAN_IMAGES_SHOWN)
                .map(|p| (format!("#{} (n={})", p.label, p.size), p.mean.clone()))
                .collect();
            write_text(&path, &emit_image_grid(&tiles, side, 3.0))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn alpha_tag(a: f64) -> String {
    format!("{a}").replace('.', "_")
}

#[derive(Debug, Serialize)]
struct SweepFile<'a> {
    config: &'a RunConfig,
    source: &'a str,
    rows: &'a [SweepRow],
    warnings: &'a [String],
}

pub fn write_sweep(
    cfg: &RunConfig,
    ds: &Dataset,
    rows: &[SweepRow],
    warnings: &[String],
) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out;
    let emb_dir = dir.join("embeddings");
    fs::create_dir_all(&emb_dir).with_context(|| format!("creating {}", emb_dir.display()))?;
    let mut written = Vec::new();

    let ks: Vec<usize> = rows
        .first()
        .map(|r| r.knn_preservation.keys().copied().collect())
        .unwrap_or_default();
    let mut text = String::from("alpha,separation_ratio,kl");
    for k in &ks {
        text.push_str(&format!(",knn_{k}"));
    }
    text.push_str(",cluster_count,eps,fixed_eps_cluster_count,wall_time_seconds\n");
    for r in rows {
        let sep = r.separation_ratio.map(format_f64).unwrap_or_default();
        text.push_str(&format!("{},{},{}", r.alpha, sep, format_f64(r.kl)));
        for k in &ks {
            text.push_str(&format!(",{}", format_f64(r.knn_preservation[k])));
        }
        text.push_str(&format!(
            ",{},{},{},{:.3}\n",
            r.cluster_count,
            format_f64(r.eps),
            r.fixed_eps_cluster_count,
            r.wall_time_seconds
        ));
    }
    let path = dir.join("sweep.csv");
    write_text(&path, &text)?;
    written.push(path);

    let path = dir.join("sweep.json");
    write_json(
        &path,
        &SweepFile {
            config: cfg,
            source: &ds.source,
            rows,
            warnings,
        },
    )?;
    written.push(path);

    let path = dir.join("config.json");
    write_json(&path, cfg)?;
    written.push(path);

    let curve = |f: &dyn Fn(&SweepRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter()
            .filter_map(|r| f(r).map(|v| (r.alpha, v)))
            .collect()
    };
    let sep = curve(&|r| r.separation_ratio);
    if !sep.is_empty() {
        let path = dir.join("separation.svg");
        let s = Series {
            name: "separation ratio".into(),
            points: sep,
        };
        write_text(
            &path,
            &emit_curve_svg("Separation vs alpha", "alpha", "separation ratio", &[s]),
        )?;
        written.push(path);
    }
    let path = dir.join("kl.svg");
    let s = Series {
        name: "KL".into(),
        points: curve(&|r| Some(r.kl)),
    };
    write_text(
        &path,
        &emit_curve_svg("KL divergence vs alpha", "alpha", "KL", &[s]),
    )?;
    written.push(path);
    if !ks.is_empty() {
        let path = dir.join("knn.svg");
        let series: Vec<Series> = ks
            .iter()
            .map(|k| Series {
                name: format!("k = {k}"),
                points: curve(&|r| r.knn_preservation.get(k).copied()),
            })
            .collect();
        write_text(
            &path,
            &emit_curve_svg(
                "k-NN preservation vs alpha",
                "alpha",
                "preservation",
                &series,
            ),
        )?;
        written.push(path);
    }

    for r in rows {
        let Some(emb) = &r.embedding else { continue };
        let tag = alpha_tag(r.alpha);
        let path = emb_dir.join(format!("alpha_{tag}.csv"));
        write_embedding_csv(&path, emb, ds.labels.as_deref())?;
        written.push(path);
        let path = emb_dir.join(format!("alpha_{tag}.svg"));
        let style = SvgStyle {
            title: Some(format!("alpha = {}", r.alpha)),
            ..SvgStyle::default()
        };
        write_text(&path, &emit_svg(emb, ds.labels.as_deref(), &style))?;
        written.push(path);
    }
    Ok(written)
}

/// Per-α summary for the terminal.
pub fn sweep_summary(rows: &[SweepRow]) -> String {
    let mut s = String::from("alpha      separation  KL        clusters\n");
    for r in rows {
        let sep = r
            .separation_ratio
            .map_or("-".to_string(), |v| format!("{v:.4}"));
        s.push_str(&format!(
            "{:<10} {:<11} {:<9.4} {}\n",
            r.alpha, sep, r.kl, r.cluster_count
        ));
    }
    s
}

pub fn metrics_summary(m: &MetricReport) -> String {
    let mut parts = vec![format!("KL {:.4}", m.kl)];
    if let Some(s) = m.separation {
        parts.push(format!("separation {s:.4}"));
    }
    if let (Some(c), Some(e)) = (m.cluster_count, m.dbscan_eps) {
        parts.push(format!("{c} clusters (eps {e:.3})"));
    }
    for (k, v) in &m.knn_preservation {
        parts.push(format!("kNN@{k} {v:.3}"));
    }
    parts.join(", ")
}
