#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use intersectional::cli::{AlgorithmEntry, DataConfig, RunConfig, StudyConfig};
use intersectional::data::SyntheticSpec;
use intersectional::experiments::{planted, StudyKind};
use intersectional::fairness::AlgorithmSpec;
use intersectional::models::AlgorithmKind;

/// RDC over a smaller grid than the published one, to keep the runtime at
/// desk scale.
pub fn reduced_rdc() -> AlgorithmSpec {
    AlgorithmSpec::new(AlgorithmKind::Rdc)
        .with_grid("iterations", &[10.0, 20.0])
        .with_grid("epochs", &[50.0])
}

pub fn config(synthetic: SyntheticSpec, axes: &[&str], kind: Option<StudyKind>, algorithms: &[AlgorithmKind]) -> RunConfig {
    RunConfig {
        data: DataConfig {
            csv: None,
            synthetic: Some(synthetic),
        },
        axes: axes.iter().map(|a| a.to_string()).collect(),
        scenarios: vec![],
        algorithm_entries: algorithms
            .iter()
            .map(|&kind| AlgorithmEntry {
                kind,
                published_grid: false,
                hyper: Default::default(),
                grid: Default::default(),
            })
            .collect(),
        study: kind.map(|kind| StudyConfig {
            kind,
            focus_groups: vec![],
            permute_labels: false,
            other: None,
            probe: None,
        }),
        seed: 0,
        n_trials: 3,
        out: None,
        include_group_features: true,
        standardize: true,
        filter: None,
        algorithms: vec![],
    }
}

pub fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, toml::to_string(cfg).unwrap()).unwrap();
    path
}

/// A small ranking study over eight groups.
pub fn ranking_config(dir: &Path) -> PathBuf {
    let cfg = config(
        planted::monotone_base_rates(8, 300, 2.0, 21),
        &["group"],
        Some(StudyKind::RankingReification),
        &[AlgorithmKind::Baseline],
    );
    let cfg = RunConfig { n_trials: 5, ..cfg };
    write_config(dir, "ranking.toml", &cfg)
}

pub fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_intersectional"))
        .args(args)
        .status()
        .expect("binary runs")
        .code()
        .unwrap_or(-1)
}
