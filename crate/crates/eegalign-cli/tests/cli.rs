//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eegalign::alignment::{covariance, ShrinkageParam};
use eegalign::data::load_archive;
use ndarray::Array2;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_eegalign")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn mi_config(seed: u64) -> String {
    format!(
        r#"{{
  "dataset": {{
    "synth": {{
      "task": "mi",
      "params": {{
        "n_subjects": 3,
        "n_trials_per_class": 10,
        "n_channels": 6,
        "n_samples": 64,
        "fs": 128.0,
        "noise_scale": 0.4,
        "mixing_condition": 3.0,
        "seed": {seed}
      }}
    }}
  }},
  "pipeline": {{
    "alignment": {{"kind": "euclidean", "reference": "ei"}},
    "chain": {{"kind": "csp_lda", "n_filters": 4}}
  }},
  "online": {{"pool_size": 12, "first_batch": 4, "batch_size": 4, "repetitions": 2}},
  "seed": 7
}}"#
    )
}

/// Byte-level comparison of two directory trees.
fn assert_dirs_identical(a: &Path, b: &Path) {
    let mut names_a: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    let mut names_b: Vec<_> = fs::read_dir(b)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names_a.sort();
    names_b.sort();
    assert_eq!(names_a, names_b);
    for name in names_a {
        let (pa, pb) = (a.join(&name), b.join(&name));
        assert_eq!(
            fs::read(&pa).unwrap(),
            fs::read(&pb).unwrap(),
            "{} differs",
            pa.display()
        );
    }
}

#[test]
fn synth_is_deterministic_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &mi_config(11));
    for out in ["a", "b"] {
        let output = run(&[
            "synth",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join(out).to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    assert_dirs_identical(
        &dir.path().join("a/dataset"),
        &dir.path().join("b/dataset"),
    );
}

#[test]
fn offline_eval_reports_one_row_per_subject() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &mi_config(12).replace("\"n_subjects\": 3", "\"n_subjects\": 2"),
    );
    let out = dir.path().join("run");
    let output = run(&[
        "eval-offline",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("subjects=2"), "{stdout}");

    let csv = fs::read_to_string(out.join("scores.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3, "header plus one row per subject: {csv}");
    assert!(out.join("report.json").exists());
    assert!(out.join("run.json").exists());
}

#[test]
fn aligned_archive_has_identity_mean_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &mi_config(13));
    let out = dir.path().join("aligned");
    let output = run(&[
        "align",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    assert!(out.join("references.json").exists());

    let dataset = load_archive(&out.join("dataset")).unwrap();
    for subject in &dataset.subjects {
        let mut mean = Array2::<f64>::zeros((6, 6));
        for trial in &subject.trials {
            mean += covariance(trial, ShrinkageParam::none()).unwrap().as_array();
        }
        mean /= subject.trials.len() as f64;
        let identity = Array2::<f64>::eye(6);
        let deviation = (&mean - &identity).mapv(f64::abs).sum();
        // The archive stores samples at f32 precision, so the identity is
        // recovered to roughly f32 accuracy rather than the in-memory 1e-10.
        assert!(deviation < 1e-4, "subject {} deviation {deviation}", subject.subject);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &mi_config(14));
    for (out, threads) in [("t1", "1"), ("t4", "4")] {
        let output = run(&[
            "eval-online",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join(out).to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    let csv_1 = fs::read(dir.path().join("t1/scores.csv")).unwrap();
    let csv_4 = fs::read(dir.path().join("t4/scores.csv")).unwrap();
    assert_eq!(csv_1, csv_4);
}

#[test]
fn report_renders_aligned_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &mi_config(15));
    let baseline_config = write_config(
        &dir.path().join("."),
        &mi_config(15).replace(
            r#"{"kind": "euclidean", "reference": "ei"}"#,
            r#"{"kind": "none"}"#,
        ),
    );

    let ea_out = dir.path().join("ea");
    let output = run(&[
        "eval-offline",
        "--config",
        config.to_str().unwrap(),
        "--out",
        ea_out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    // Overwrites config.json, so rerun from the second file path.
    let none_out = dir.path().join("none");
    let output = run(&[
        "eval-offline",
        "--config",
        baseline_config.to_str().unwrap(),
        "--out",
        none_out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    let report_out = dir.path().join("report");
    let output = run(&[
        "report",
        "--out",
        report_out.to_str().unwrap(),
        ea_out.join("scores.csv").to_str().unwrap(),
        none_out.join("scores.csv").to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    let table = fs::read_to_string(report_out.join("report.md")).unwrap();
    assert!(table.contains("## Accuracy"), "{table}");
    assert!(table.contains("## Balanced accuracy"), "{table}");
    assert!(table.contains("| Avg"), "{table}");
    assert!(table.contains("p vs scores"), "{table}");
    let pipe_columns: Vec<usize> = table
        .lines()
        .filter(|l| l.starts_with('|'))
        .map(|l| l.len())
        .collect();
    assert!(pipe_columns.windows(2).all(|w| w[0] == w[1]), "{table}");
}

#[test]
fn unknown_config_keys_fail_with_single_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"seed": 1, "pipelin": {"alignment": {"kind": "none"}}}"#,
    );
    let output = run(&[
        "eval-offline",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: "), "{stderr}");
}

#[test]
fn preprocess_filters_and_downsamples() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = mi_config(16).replace(
        "\"seed\": 7\n}",
        "\"seed\": 7,\n  \"preprocess\": {\"band\": [8.0, 30.0], \"filter_order\": 24, \"downsample\": 2}\n}",
    );
    assert!(config_text.contains("preprocess"), "{config_text}");
    let config = write_config(dir.path(), &config_text);
    let out = dir.path().join("prep");
    let output = run(&[
        "preprocess",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let dataset = load_archive(&out.join("dataset")).unwrap();
    assert_eq!(dataset.subjects[0].trials[0].fs, 64.0);
    assert_eq!(dataset.subjects[0].trials[0].n_samples(), 32);
}
