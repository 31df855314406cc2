//! End-to-end tests of the `tinyoz` binary: output records, pretty mode,
//! determinism, and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tinyoz_core::datapipe::Scaler;
use tinyoz_core::modelpack::serialize_float;
use tinyoz_core::regress::LinearModel;
use tinyoz_core::FeatureRole;

fn tinyoz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tinyoz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn fixture_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_air.csv")
}

const MAP: &str = "co=co_mg_m3,temperature=temp_c,pressure=pressure_hpa,ozone=o3_ug_m3";

fn data_args(csv: &Path) -> Vec<String> {
    vec![
        "--data".into(),
        csv.display().to_string(),
        "--map".into(),
        MAP.into(),
    ]
}

fn run_train(extra: &[&str]) -> Output {
    let csv = fixture_csv();
    let mut args: Vec<String> = vec!["train".into()];
    args.extend(data_args(&csv));
    args.extend(extra.iter().map(|s| s.to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    tinyoz(&args)
}

// --- Happy paths ---

#[test]
fn train_emits_the_expected_records() {
    let out = run_train(&["--tol", "5"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("impute_report policy="));
    assert!(text.contains("\nmodel solver=ols lambda=0 "));
    assert!(text.contains("\nweights co="));
    assert!(text.contains("\nraw_coefficients slope_co="));
    assert!(text.contains(" split=train"));
    assert!(text.contains(" split=test"));
}

#[test]
fn train_with_sgd_and_cv_runs() {
    let out = run_train(&[
        "--solver", "sgd", "--lr", "0.05", "--epochs", "300", "--tol", "5", "--cv", "5",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("model solver=sgd "));
    assert!(text.contains("cv_summary k=5 "));
    assert_eq!(text.matches("\ncv_fold fold=").count(), 5);
}

#[test]
fn train_writes_artifacts_in_both_schemes() {
    let dir = tempfile::tempdir().unwrap();
    for (flag, scheme, size) in [(None, "float32", 55u64), (Some("--quantize"), "int8", 52)] {
        let path = dir.path().join(format!("{scheme}.toz"));
        let path_str = path.display().to_string();
        let mut extra = vec!["--out", path_str.as_str()];
        if let Some(f) = flag {
            extra.push(f);
        }
        let out = run_train(&extra);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        assert!(stdout(&out).contains(&format!("scheme={scheme}")));
        assert_eq!(path.metadata().unwrap().len(), size);
    }
}

#[test]
fn trained_artifact_feeds_the_simulator() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = dir.path().join("model.toz");
    let artifact_str = artifact.display().to_string();
    let out = run_train(&["--out", artifact_str.as_str()]);
    assert!(out.status.success());

    let out = tinyoz(&[
        "simulate", "--model", artifact_str.as_str(), "--steps", "10",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let steps = text.lines().filter(|l| l.starts_with("step t=")).count();
    assert_eq!(steps, 10);
    assert!(text.contains("lcd1=[O3 "));
    assert!(text.contains("summary steps=10 "));

    let out = tinyoz(&[
        "simulate", "--model", artifact_str.as_str(), "--steps", "10", "--summary-only",
    ]);
    let text = stdout(&out);
    assert!(!text.contains("step t="));
    assert!(text.starts_with("summary steps=10 "));
}

#[test]
fn sweep_ranks_all_default_combos() {
    let csv = fixture_csv();
    let mut args: Vec<String> = vec!["sweep".into()];
    args.extend(data_args(&csv));
    args.extend(["--tol".into(), "5".into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = tinyoz(&args);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("\nsweep combo=").count(), 4);
    assert!(text.contains("sweep_ranking order="));
}

#[test]
fn sweep_accepts_custom_combos() {
    let csv = fixture_csv();
    let mut args: Vec<String> = vec!["sweep".into()];
    args.extend(data_args(&csv));
    args.extend(["--combos".into(), "co,co+pressure".into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = tinyoz(&args);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("sweep combo=co "));
    assert!(text.contains("sweep combo=co+pressure "));
    assert_eq!(text.matches("\nsweep combo=").count(), 2);
}

#[test]
fn sensitivity_from_data_and_from_artifact_agree() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = dir.path().join("model.toz");
    let artifact_str = artifact.display().to_string();
    run_train(&["--out", artifact_str.as_str()]);

    let csv = fixture_csv();
    let mut args: Vec<String> = vec!["sensitivity".into()];
    args.extend(data_args(&csv));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let from_data = tinyoz(&args);
    assert!(from_data.status.success(), "stderr: {}", stderr(&from_data));

    let from_artifact = tinyoz(&["sensitivity", "--model", artifact_str.as_str()]);
    assert!(from_artifact.status.success());

    // same fitted model, so the printed ordering line must agree
    let ordering = |text: &str| {
        text.lines()
            .find(|l| l.starts_with("ordering "))
            .map(String::from)
            .expect("ordering line")
    };
    assert_eq!(
        ordering(&stdout(&from_data)),
        ordering(&stdout(&from_artifact))
    );
}

#[test]
fn impute_choice_changes_the_report() {
    let out = run_train(&["--impute", "drop"]);
    assert!(stdout(&out).contains("impute_report policy=drop_rows rows_dropped=12"));
    let out = run_train(&["--impute", "mean"]);
    assert!(stdout(&out).contains("impute_report policy=mean_impute rows_dropped=3"));
    let out = run_train(&["--impute", "ffill"]);
    assert!(stdout(&out).contains("impute_report policy=forward_fill"));
}

#[test]
fn pretty_output_is_for_humans() {
    let out = run_train(&["--pretty", "--tol", "5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("Imputation: "));
    assert!(text.contains("Model: ols"));
    assert!(text.contains("Train "));
    assert!(!text.contains("impute_report"));
}

// --- Determinism ---

#[test]
fn reruns_are_byte_identical() {
    let a = run_train(&["--seed", "7", "--tol", "5"]);
    let b = run_train(&["--seed", "7", "--tol", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let c = run_train(&["--seed", "8", "--tol", "5"]);
    assert_ne!(a.stdout, c.stdout, "seed must matter");
}

// --- Exit codes ---

#[test]
fn missing_data_file_exits_1() {
    let out = tinyoz(&["train", "--data", "/nonexistent/air.csv", "--map", MAP]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("FileNotFound: "));
}

#[test]
fn unknown_feature_exits_2() {
    let csv = fixture_csv();
    let csv_str = csv.display().to_string();
    let out = tinyoz(&[
        "train", "--data", csv_str.as_str(), "--map", MAP, "--features", "co,humidity",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("UnknownFeature"));
}

#[test]
fn duplicate_feature_exits_2() {
    let csv = fixture_csv();
    let csv_str = csv.display().to_string();
    let out = tinyoz(&[
        "train", "--data", csv_str.as_str(), "--map", MAP, "--features", "co,co",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("DuplicateFeature"));
}

#[test]
fn malformed_map_exits_2() {
    let csv = fixture_csv();
    let csv_str = csv.display().to_string();
    let out = tinyoz(&["train", "--data", csv_str.as_str(), "--map", "co:wrong"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MalformedMapping"));
}

#[test]
fn map_without_ozone_exits_2() {
    let csv = fixture_csv();
    let csv_str = csv.display().to_string();
    let out = tinyoz(&["train", "--data", csv_str.as_str(), "--map", "co=co_mg_m3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ozone"));
}

#[test]
fn map_to_absent_column_exits_1() {
    let csv = fixture_csv();
    let csv_str = csv.display().to_string();
    let out = tinyoz(&[
        "train",
        "--data",
        csv_str.as_str(),
        "--map",
        "co=no_such_column,temperature=temp_c,pressure=pressure_hpa,ozone=o3_ug_m3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("MappedColumnAbsent: "));
}

#[test]
fn corrupt_artifact_exits_1_with_checksum_error() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = dir.path().join("model.toz");
    let artifact_str = artifact.display().to_string();
    run_train(&["--out", artifact_str.as_str()]);
    let mut bytes = std::fs::read(&artifact).unwrap();
    bytes[20] ^= 0x04;
    std::fs::write(&artifact, &bytes).unwrap();

    let out = tinyoz(&["simulate", "--model", artifact_str.as_str()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ChecksumMismatch"));
}

#[test]
fn zero_weight_artifact_fails_sensitivity() {
    let model = LinearModel::new(
        vec![0.0, 0.0],
        5.0,
        Scaler::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap(),
        vec![FeatureRole::Co, FeatureRole::Pressure],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let artifact = dir.path().join("flat.toz");
    std::fs::write(&artifact, serialize_float(&model)).unwrap();

    let artifact_str = artifact.display().to_string();
    let out = tinyoz(&["sensitivity", "--model", artifact_str.as_str()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("DegenerateModel"));
}

#[test]
fn sensitivity_without_any_source_exits_2() {
    let out = tinyoz(&["sensitivity"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--model"));
}

#[test]
fn bad_simulation_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = dir.path().join("model.toz");
    let artifact_str = artifact.display().to_string();
    run_train(&["--out", artifact_str.as_str()]);

    let out = tinyoz(&[
        "simulate", "--model", artifact_str.as_str(), "--dt", "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("InvalidConfig: "));
}
