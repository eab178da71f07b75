mod common;

use std::fs;

use common::{config, run_cli, write_config};
use intersectional::cli::{CsvSource, GENERATED_CSV};
use intersectional::data::{generate_synthetic, CsvSchema};
use intersectional::experiments::{planted, StudyKind};
use intersectional::models::AlgorithmKind;
use tempfile::tempdir;

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn study_writes_all_outputs() {
    let dir = tempdir().unwrap();
    let cfg = config(
        planted::granularity(80, true, 3),
        &["race"],
        Some(StudyKind::Granularity),
        &[AlgorithmKind::Baseline],
    );
    let path = write_config(dir.path(), "g.toml", &cfg);
    let out = dir.path().join("out");
    assert_eq!(run_cli(&["study", "--config", s(&path), "--out", s(&out), "--quiet", "--trials", "2"]), 0);
    for f in ["report.json", "report.csv", "table.txt", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_trials"], 2);
    assert_eq!(manifest["trial_seeds"], serde_json::json!([0, 1]));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("scenario,algorithm,variant,point,metric,mean,half_width,n,status,combined_p"));
}

#[test]
fn validate_config_rejects_two_sources() {
    let dir = tempdir().unwrap();
    let mut cfg = config(planted::granularity(20, true, 3), &["race"], None, &[]);
    let data = dir.path().join("x.csv");
    fs::write(&data, "f,race,label\n").unwrap();
    cfg.data.csv = Some(CsvSource {
        path: data,
        schema: CsvSchema::new("label", &["f"], &["race"]),
    });
    let path = write_config(dir.path(), "both.toml", &cfg);
    assert_eq!(run_cli(&["validate-config", "--config", s(&path)]), 1);

    cfg.data.csv = None;
    let path = write_config(dir.path(), "one.toml", &cfg);
    assert_eq!(run_cli(&["validate-config", "--config", s(&path)]), 0);
}

#[test]
fn missing_config_file_is_a_usage_error() {
    assert_eq!(run_cli(&["study", "--config", "/nonexistent/run.toml"]), 1);
}

#[test]
fn generated_csv_reproduces_the_synthetic_study() {
    let dir = tempdir().unwrap();
    let spec = planted::monotone_base_rates(4, 80, 2.0, 9);
    let synth = config(spec.clone(), &["group"], Some(StudyKind::RankingReification), &[AlgorithmKind::Baseline]);
    let synth_path = write_config(dir.path(), "synth.toml", &synth);

    let gen = dir.path().join("gen");
    assert_eq!(run_cli(&["generate", "--config", s(&synth_path), "--out", s(&gen), "--quiet"]), 0);

    let mut from_csv = synth.clone();
    from_csv.data.synthetic = None;
    from_csv.data.csv = Some(CsvSource {
        path: gen.join(GENERATED_CSV),
        schema: CsvSchema::for_dataset(&generate_synthetic(&spec).unwrap()),
    });
    let csv_path = write_config(dir.path(), "csv.toml", &from_csv);

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_cli(&["study", "--config", s(&synth_path), "--out", s(&a), "--quiet"]), 0);
    assert_eq!(run_cli(&["study", "--config", s(&csv_path), "--out", s(&b), "--quiet"]), 0);
    assert_eq!(
        fs::read_to_string(a.join("report.json")).unwrap(),
        fs::read_to_string(b.join("report.json")).unwrap()
    );
}

#[test]
fn train_then_evaluate() {
    let dir = tempdir().unwrap();
    let cfg = config(planted::base_rate_disparity(100, 5), &["race", "sex"], None, &[AlgorithmKind::Baseline]);
    let path = write_config(dir.path(), "t.toml", &cfg);
    let out = dir.path().join("model");
    assert_eq!(run_cli(&["train", "--config", s(&path), "--out", s(&out), "--quiet"]), 0);
    assert!(out.join("model.bin").is_file());
    let train: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(train["algorithm"], "baseline");
    assert_eq!(train["grid"].as_array().unwrap().len(), 1);

    let eval = dir.path().join("eval");
    let model = out.join("model.bin");
    assert_eq!(
        run_cli(&["evaluate", "--config", s(&path), "--model", s(&model), "--out", s(&eval), "--quiet"]),
        0
    );
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["groups"].as_array().unwrap().len(), 4);
    let acc = report["soft_accuracy"].as_f64().unwrap();
    assert!(acc > 0.5 && acc < 1.0, "{acc}");
}

#[test]
fn train_needs_exactly_one_algorithm() {
    let dir = tempdir().unwrap();
    let cfg = config(
        planted::base_rate_disparity(50, 5),
        &["race", "sex"],
        None,
        &[AlgorithmKind::Baseline, AlgorithmKind::Rwt],
    );
    let path = write_config(dir.path(), "t.toml", &cfg);
    assert_eq!(run_cli(&["train", "--config", s(&path), "--out", s(dir.path()), "--quiet"]), 1);
}

#[test]
fn empty_algorithm_list_gives_a_header_only_table() {
    let dir = tempdir().unwrap();
    let cfg = config(planted::granularity(40, true, 3), &["race"], Some(StudyKind::Granularity), &[]);
    let path = write_config(dir.path(), "e.toml", &cfg);
    let out = dir.path().join("out");
    assert_eq!(run_cli(&["study", "--config", s(&path), "--out", s(&out), "--quiet"]), 0);
    let table = fs::read_to_string(out.join("table.txt")).unwrap();
    assert_eq!(table.lines().count(), 2, "{table}");
}

#[test]
fn shipped_example_configs_validate() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            seen += 1;
            assert_eq!(run_cli(&["validate-config", "--config", s(&path)]), 0, "{}", path.display());
        }
    }
    assert!(seen >= 4);
}
