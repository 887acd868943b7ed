use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use burden_core::datagen::load_csv_dataset;
use burden_core::datagen::{generate_adult_like, surrogate_fico_tables, write_csv_dataset_to};
use burden_core::domain::SubPopCondition;
use burden_core::metrics::feature_bias_check;
use tempfile::TempDir;

fn burden(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burden"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Data rows of a CSV written by the tool, split on commas, header excluded.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, body)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, body) = rows(path);
    let k = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    body.into_iter().map(|r| r[k].clone()).collect()
}

fn toy_audit_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let data = write(dir, "toy.csv", "x,y,z\n1,0,0\n3,1,0\n2,0,1\n4,1,1\n");
    let clf = write(
        dir,
        "clf.json",
        r#"{"kind": "threshold", "tau0": 3, "tau1": 3}"#,
    );
    (data, clf)
}

#[test]
fn empty_threshold_grid_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"grid0": {"lo": 0, "hi": 1, "count": 0}}"#,
    );
    let out = burden(&["sweep", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn classifier_missing_a_field_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let (data, _) = toy_audit_inputs(dir.path());
    write(
        dir.path(),
        "bad.json",
        r#"{"kind": "threshold", "tau0": 3}"#,
    );
    let out = burden(
        &[
            "audit",
            "--data",
            data.to_str().unwrap(),
            "--classifier",
            "bad.json",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"repetitions": 1, "sigma_grid": [1]}"#,
    );
    let out = burden(&["synth", "--config", "c.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma_grid"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        burden(&["synth", "--bogus"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn toy_audit_reports_zero_rate_gap_and_half_unit_burden_gap() {
    let dir = TempDir::new().unwrap();
    toy_audit_inputs(dir.path());
    let out = burden(
        &[
            "audit",
            "--data",
            "toy.csv",
            "--classifier",
            "clf.json",
            "--psi",
            "sr",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entry = &report["entries"][0];
    assert_eq!(entry["metrics"]["psi"], "sr");
    assert_eq!(entry["metrics"]["h_gap"].as_f64().unwrap(), 0.0);
    assert!((entry["metrics"]["g_gap"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    for key in ["lower", "upper", "constraint_lhs"] {
        assert!(
            (entry["bounds"][key].as_f64().unwrap() - 0.5).abs() < 1e-12,
            "{key}"
        );
    }

    let csv = dir.path().join("o/audit.csv");
    assert_eq!(column(&csv, "g"), vec!["0.5"]);
    assert_eq!(column(&csv, "h"), vec!["0"]);
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/audit.json")).unwrap())
            .unwrap();
    assert_eq!(on_disk, report);
}

#[test]
fn linear_multi_feature_audit_exact_value_matches_measured_gap() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("a,b,y,z\n");
    for i in 0..40 {
        let a = (i * 7 % 13) as f64 / 2.0;
        let b = (i * 5 % 11) as f64;
        text.push_str(&format!("{a},{b},{},{}\n", i % 3 == 0, i % 2));
    }
    write(
        dir.path(),
        "d.csv",
        &text.replace("true", "1").replace("false", "0"),
    );
    write(
        dir.path(),
        "clf.json",
        r#"{"kind": "linear", "u": [1.0, 0.5], "v0": 6.0, "v1": 5.0}"#,
    );
    write(
        dir.path(),
        "c.json",
        r#"{"cost": {"kind": "linear", "costs": {"a": 2.0, "b": 1.0}, "group0_multiplier": 1.5}}"#,
    );
    let out = burden(
        &[
            "audit",
            "--config",
            "c.json",
            "--data",
            "d.csv",
            "--classifier",
            "clf.json",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        let exact = e["bounds"]["exact"].as_f64().unwrap();
        let g = e["metrics"]["g_gap"].as_f64().unwrap();
        assert!((exact - g).abs() <= 1e-6, "exact {exact} vs measured {g}");
        assert_eq!(e["bounds"]["lower"], e["bounds"]["upper"]);
    }
}

#[test]
fn threshold_classifier_with_multi_feature_cost_is_rejected() {
    let dir = TempDir::new().unwrap();
    toy_audit_inputs(dir.path());
    write(
        dir.path(),
        "c.json",
        r#"{"cost": {"kind": "quadratic", "matrix": [[1.0]]}}"#,
    );
    let out = burden(
        &[
            "audit",
            "--config",
            "c.json",
            "--data",
            "toy.csv",
            "--classifier",
            "clf.json",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_single_repetition_single_sigma_writes_one_row_with_header_comment() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"sigma0_grid": [2.0], "repetitions": 1}"#,
    );
    let out = burden(&["synth", "--config", "c.json", "--out", "o"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = dir.path().join("o/synth_summary.csv");
    let text = std::fs::read_to_string(&summary).unwrap();
    let first = text.lines().next().unwrap();
    assert!(
        first.starts_with(&format!(
            "# burden {} config_sha256=",
            env!("CARGO_PKG_VERSION")
        )),
        "{first}"
    );
    assert_eq!(first.rsplit('=').next().unwrap().len(), 64);
    assert_eq!(rows(&summary).1.len(), 1);
    assert_eq!(column(&summary, "repetitions"), vec!["1"]);
    assert!(dir.path().join("o/synth_g.svg").exists());
}

#[test]
fn psi_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"sigma0_grid": [1.0, 3.0], "repetitions": 2, "psi": "sr"}"#,
    );
    let out = burden(
        &["synth", "--config", "c.json", "--psi", "both", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success());
    let psi = column(&dir.path().join("o/synth_summary.csv"), "psi");
    assert_eq!(psi, vec!["sr", "tpr", "sr", "tpr"]);
}

#[test]
fn output_directory_does_not_change_the_config_hash() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"sigma0_grid": [1.0], "repetitions": 1}"#,
    );
    for out in ["a", "b"] {
        assert!(
            burden(&["synth", "--config", "c.json", "--out", out], dir.path())
                .status
                .success()
        );
    }
    let a = std::fs::read(dir.path().join("a/synth_summary.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/synth_summary.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_with_one_split_has_zero_stderr_and_full_tradeoff_curve() {
    let dir = TempDir::new().unwrap();
    let eps: Vec<String> = (0..11)
        .map(|k| format!("{}", -0.25 + 0.05 * k as f64))
        .collect();
    write(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"data": {{"kind": "adult_like", "n": 1500, "data_seed": 3}}, "eps_grid": [{}], "save_classifiers": true}}"#,
            eps.join(", ")
        ),
    );
    let out = burden(
        &["train", "--config", "c.json", "--splits", "1", "--out", "o"],
        dir.path(),
    );
    let o = dir.path().join("o");
    let summary = o.join("train_summary.csv");
    assert!(summary.exists(), "{}", String::from_utf8_lossy(&out.stderr));
    let n_used = column(&summary, "n_used");
    for (k, se) in column(&summary, "accuracy_stderr").iter().enumerate() {
        if n_used[k] == "1" {
            assert_eq!(se, "0");
        }
    }
    assert_eq!(rows(&o.join("tradeoff_sr.csv")).1.len(), 11);
    assert!(o.join("classifiers").read_dir().unwrap().count() > 0);

    // Each saved classifier audits cleanly against the data it was trained on.
    let clf = o
        .join("classifiers")
        .read_dir()
        .unwrap()
        .map(|e| e.unwrap().path())
        .min()
        .unwrap();
    let artifact: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&clf).unwrap()).unwrap();
    assert!(artifact["normalization"].is_object());
    assert!(artifact["metadata"]["config_sha256"].is_string());
}

#[test]
fn shared_thresholds_never_favor_the_disadvantaged_group_on_the_surrogate() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"psi": "sr", "source": {"kind": "surrogate", "counts": [2000, 6000]}, "costs": [{"kind": "linear"}]}"#,
    );
    let out = burden(
        &["sweep", "--config", "c.json", "--seed", "5", "--out", "o"],
        dir.path(),
    );
    assert!(
        out.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = dir.path().join("o/sweep_linear.csv");
    let (header, body) = rows(&csv);
    let idx = |n: &str| header.iter().position(|h| h == n).unwrap();
    let mut shared = 0;
    for r in &body {
        let neg = r[idx("negatives0_sr")] != "0" && r[idx("negatives1_sr")] != "0";
        if r[idx("tau0")] == r[idx("tau1")] && neg {
            shared += 1;
            let g: f64 = r[idx("g_sr")].parse().unwrap();
            assert!(g >= 0.0, "tau {} has G = {g}", r[idx("tau0")]);
        }
    }
    assert!(shared > 10);
    assert!(dir.path().join("o/linear_sr_h_vs_g.svg").exists());
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

#[test]
fn bundled_survey_data_matches_the_generator() {
    let mut expected = Vec::new();
    write_csv_dataset_to(&generate_adult_like(10_000, 2024).unwrap(), &mut expected).unwrap();
    assert_eq!(
        std::fs::read(bundled("adult_synthetic.csv")).unwrap(),
        expected
    );
}

#[test]
fn bundled_score_table_matches_the_surrogate() {
    let mut expected = Vec::new();
    surrogate_fico_tables().write_to(&mut expected).unwrap();
    assert_eq!(
        std::fs::read(bundled("fico_surrogate.csv")).unwrap(),
        expected
    );
}

#[test]
fn sweep_accepts_the_bundled_table_file() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"psi": "tpr", "costs": [{"kind": "quadratic"}]}"#,
    );
    let table = bundled("fico_surrogate.csv");
    let out = burden(
        &[
            "sweep",
            "--config",
            "c.json",
            "--tables",
            table.to_str().unwrap(),
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(
        out.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let status = column(&dir.path().join("o/optimum_quadratic.csv"), "status");
    assert_eq!(status[0], "ok");
}

#[test]
fn sweep_on_a_csv_dataset_matches_the_synthetic_bias_direction() {
    let dir = TempDir::new().unwrap();
    let data = burden_core::datagen::generate_synthetic_1d(4.0, 8.0, 1.0, 300, 11).unwrap();
    let path = dir.path().join("d.csv");
    burden_core::datagen::write_csv_dataset(&data, &path).unwrap();
    assert!(
        feature_bias_check(
            &load_csv_dataset(&path, None).unwrap(),
            SubPopCondition::All
        )
        .unwrap()
        .biased_against_0
    );
    let out = burden(
        &["sweep", "--data", "d.csv", "--psi", "sr", "--out", "o"],
        dir.path(),
    );
    assert!(
        out.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(rows(&dir.path().join("o/sweep_linear.csv")).1.len() == 100 * 100);
}
