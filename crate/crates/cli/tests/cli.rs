use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use htsne::csv_io::load_embedding_csv;
use htsne::idx::{encode_images, encode_labels, IdxImages};

fn htsne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htsne"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_csv(dir: &Path) -> std::path::PathBuf {
    let mut text = String::from("f0,f1,f2,label\n");
    for i in 0..60 {
        let c = (i % 3) as f64 * 6.0;
        let t = i as f64 * 0.7;
        text.push_str(&format!(
            "{},{},{},{}\n",
            c + t.sin(),
            c + t.cos(),
            (2.0 * t).sin(),
            i % 3
        ));
    }
    let path = dir.join("data.csv");
    fs::write(&path, text).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_input_is_a_usage_error_naming_the_path() {
    let o = htsne(&["--input", "/no/such/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/file.csv"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_and_bad_values_are_usage_errors() {
    assert_eq!(htsne(&["--bogus"]).status.code(), Some(2));
    assert_eq!(
        htsne(&["--preset", "toy10", "--alpha", "-1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        htsne(&["--preset", "toy10", "--sweep-alphas", "1:0:1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(htsne(&["--preset", "nope"]).status.code(), Some(2));
    assert_eq!(htsne(&[]).status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let o = Command::new(env!("CARGO_BIN_EXE_htsne"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--input",
        "--alpha",
        "--sweep-alphas",
        "--preset",
        "--metrics",
        "--pca-dims",
    ] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn csv_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_csv(dir.path());
    let out = dir.path().join("out");
    let o = htsne(&[
        "--input",
        path_str(&input),
        "--perplexity",
        "10",
        "--iterations",
        "300",
        "--metrics",
        "5,10",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "embedding.csv",
        "embedding.svg",
        "metrics.json",
        "report.json",
        "config.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let (emb, labels) = load_embedding_csv(&out.join("embedding.csv")).unwrap();
    assert_eq!(emb.len(), 60);
    assert_eq!(labels[..4], [0, 1, 2, 0]);
    let svg = fs::read_to_string(out.join("embedding.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 60);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["knn_preservation"]["5"].as_f64().unwrap() > 0.0);
    assert!(metrics["separation"].as_f64().unwrap() > 1.0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["dataset"]["n_points"], 60);
    assert_eq!(report["config"]["iterations"], 300);
    assert!(report["affinity"]["symmetric"].as_bool().unwrap());
    assert!(report["loss_trace"].as_array().unwrap().len() >= 6);
}

#[test]
fn config_snapshot_reproduces_run_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_csv(dir.path());
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = htsne(&[
        "--input",
        path_str(&input),
        "--perplexity",
        "8",
        "--iterations",
        "250",
        "--alpha",
        "0.6",
        "--solver",
        "accelerated",
        "--sequential",
        "--out",
        path_str(&first),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = first.join("config.json");
    let o = htsne(&["--config", path_str(&cfg), "--out", path_str(&second)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("embedding.csv")).unwrap(),
        fs::read(second.join("embedding.csv")).unwrap()
    );
}

#[test]
fn config_file_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"synthetic": "toy10", "alpah": 0.5}"#).unwrap();
    let o = htsne(&["--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpah"), "{}", stderr(&o));
}

fn write_idx(dir: &Path, n: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let side = 8;
    let mut pixels = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        for p in 0..side * side {
            let on = (p % side < side / 2) == (class == 0);
            pixels.push(if on {
                200 + (i * 7 + p) as u8 % 50
            } else {
                ((i * 13 + p * 3) % 40) as u8
            });
        }
        labels.push(class as u8);
    }
    let img = dir.join("images-idx3-ubyte");
    let lbl = dir.join("labels-idx1-ubyte");
    fs::write(
        &img,
        encode_images(&IdxImages {
            count: n,
            rows: side,
            cols: side,
            pixels,
        }),
    )
    .unwrap();
    fs::write(&lbl, encode_labels(&labels)).unwrap();
    (img, lbl)
}

#[test]
fn idx_input_with_pca_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = write_idx(dir.path(), 80);
    let out = dir.path().join("out");
    let o = htsne(&[
        "--input",
        path_str(&img),
        "--format",
        "idx",
        "--labels",
        path_str(&lbl),
        "--pca-dims",
        "10",
        "--perplexity",
        "10",
        "--iterations",
        "250",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["dataset"]["dims"], 64);
    assert_eq!(report["dataset"]["input_dims"], 10);
    assert!(out.join("cluster_means.svg").is_file());
}

#[test]
fn idx_sweep_without_labels_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = write_idx(dir.path(), 20);
    let o = htsne(&[
        "--input",
        path_str(&img),
        "--format",
        "idx",
        "--sweep-alphas",
        "0.5,1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--labels"), "{}", stderr(&o));
}

#[test]
fn corrupt_idx_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("bad");
    fs::write(&img, [0u8, 0, 8, 1, 0, 0, 0, 3, 1]).unwrap();
    let o = htsne(&["--input", path_str(&img), "--format", "idx"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn two_cluster_sweep_produces_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = htsne(&[
        "--preset",
        "two-clusters",
        "--sweep-alphas",
        "0.2:3.0:0.2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 15);
    assert!(rows[0].starts_with("0.2,"));
    assert!(rows[14].starts_with("3,"));
    let sep: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // the two ends of the range differ clearly even for a single seed
    assert!(sep[0] > sep[14], "{sep:?}");
    let curve = fs::read_to_string(out.join("separation.svg")).unwrap();
    assert_eq!(curve.matches("<circle").count(), 15);
    assert!(out.join("embeddings/alpha_0_2.csv").is_file());
    assert!(out.join("embeddings/alpha_3.svg").is_file());
}

#[test]
fn toy10_heavier_tail_separates_more() {
    let dir = tempfile::tempdir().unwrap();
    let sep = |alpha: &str| {
        let out = dir.path().join(alpha);
        let o = htsne(&[
            "--preset",
            "toy10",
            "--alpha",
            alpha,
            "--out",
            path_str(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
        assert_eq!(m["cluster_count"], 10);
        m["separation"].as_f64().unwrap()
    };
    let heavy = sep("0.5");
    let standard = sep("1");
    assert!(heavy > standard, "{heavy} vs {standard}");
}
