//! The study protocols. Every study runs `n_trials` trials; trial `t` uses
//! seed `seed + t` for its split, subsampling and model initialization, and
//! results are aggregated per cell into 95% intervals.

pub mod planted;
mod studies;

pub use studies::{DONORS_ONLY, TARGET_INCLUDED};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, load_csv, split, standardize, CsvSchema, Dataset, SplitSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fairness::{AlgorithmSpec, Hyper};
use crate::groups::{filter_groups, GroupFilter, GroupLabels, GroupingScheme, OtherStrategy};
use crate::metrics::{confidence_interval, fisher_combine, EvaluationReport};
use crate::seed;

use rand::seq::SliceRandom;

pub const DEFAULT_TRIALS: usize = 5;
/// Combined p-values below this count as significant.
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Granularity,
    OtherHandling,
    SubgroupPredictivity,
    MixtureProbe,
    RankingReification,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Granularity => "granularity",
            StudyKind::OtherHandling => "other_handling",
            StudyKind::SubgroupPredictivity => "subgroup_predictivity",
            StudyKind::MixtureProbe => "mixture_probe",
            StudyKind::RankingReification => "ranking_reification",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, schema: CsvSchema },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv { path, schema } => load_csv(path, schema),
            DataSource::Synthetic(spec) => generate_synthetic(spec),
        }
    }
}

/// A training grouping: the finest groups with the ids in `merge` relabelled,
/// so every scenario is a coarsening of the finest scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub merge: BTreeMap<String, String>,
}

impl Scenario {
    pub fn identity(name: &str) -> Self {
        Self {
            name: name.into(),
            merge: BTreeMap::new(),
        }
    }

    pub fn merged(name: &str, merge: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            merge: merge.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    pub fn scheme(&self, finest: &GroupingScheme) -> Result<GroupingScheme> {
        finest.merge(&self.name, &self.merge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtherParams {
    pub other_group: String,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<OtherStrategy>,
}

fn all_strategies() -> Vec<OtherStrategy> {
    OtherStrategy::ALL.to_vec()
}

/// Settings of both predictivity probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub target: String,
    /// Candidate training groups. The mixture probe uses the first two.
    pub donors: Vec<String>,
    /// Training rows per model.
    pub n: usize,
    /// Shares of the first donor tried by the mixture probe.
    #[serde(default = "default_ratio_grid")]
    pub ratio_grid: Vec<f64>,
    /// Target rows swapped into the budget; defaults to 0, n/4, n/2, 3n/4, n.
    #[serde(default)]
    pub target_counts: Vec<usize>,
    /// Fixed baseline parameters for every probe model.
    #[serde(default = "default_probe_hyper")]
    pub hyper: Hyper,
}

pub fn default_ratio_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

pub fn default_probe_hyper() -> Hyper {
    [("batch_size", 64.0), ("epochs", 50.0), ("learning_rate", 0.005)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

impl ProbeParams {
    pub fn counts(&self) -> Vec<usize> {
        if self.target_counts.is_empty() {
            (0..=4).map(|q| self.n * q / 4).collect()
        } else {
            self.target_counts.clone()
        }
    }
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn yes() -> bool {
    true
}

/// Declarative description of one study run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub study: StudyKind,
    pub data: DataSource,
    /// Axes whose conjunction is the finest grouping.
    pub axes: Vec<String>,
    /// Training groupings; one identity scenario named `fine` when empty.
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Applied to the finest grouping before splitting.
    #[serde(default)]
    pub filter: Option<GroupFilter>,
    /// Append a one-hot of the training group to the model input.
    #[serde(default = "yes")]
    pub include_group_features: bool,
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Null control: permute labels (seeded by `seed`) before anything else.
    #[serde(default)]
    pub permute_labels: bool,
    /// Granularity only: restrict the max TPR difference to these groups.
    #[serde(default)]
    pub focus_groups: Vec<String>,
    #[serde(default)]
    pub other: Option<OtherParams>,
    #[serde(default)]
    pub probe: Option<ProbeParams>,
}

impl ExperimentSpec {
    pub fn new(study: StudyKind, data: DataSource, axes: &[&str]) -> Self {
        Self {
            study,
            data,
            axes: axes.iter().map(|a| a.to_string()).collect(),
            scenarios: Vec::new(),
            algorithms: Vec::new(),
            n_trials: DEFAULT_TRIALS,
            seed: 0,
            filter: None,
            include_group_features: true,
            standardize: true,
            permute_labels: false,
            focus_groups: Vec::new(),
            other: None,
            probe: None,
        }
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        if self.scenarios.is_empty() {
            vec![Scenario::identity("fine")]
        } else {
            self.scenarios.clone()
        }
    }

    /// Checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if self.n_trials < 2 {
            return Err(Error::Validation(format!("n_trials must be at least 2, got {}", self.n_trials)));
        }
        if self.axes.is_empty() {
            return Err(Error::Validation("at least one axis is required".into()));
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("scenario names must be unique".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            a.validate()?;
            if self.algorithms[..i].iter().any(|b| b.kind == a.kind) {
                return Err(Error::Validation(format!("algorithm {} is listed twice", a.kind)));
            }
        }
        match self.study {
            StudyKind::Granularity | StudyKind::OtherHandling | StudyKind::RankingReification => {}
            StudyKind::SubgroupPredictivity | StudyKind::MixtureProbe => {
                let p = self
                    .probe
                    .as_ref()
                    .ok_or_else(|| Error::Validation(format!("{} needs [probe] settings", self.study.name())))?;
                if p.n == 0 {
                    return Err(Error::Validation("probe n must be positive".into()));
                }
                if p.donors.is_empty() {
                    return Err(Error::Validation("probe needs at least one donor".into()));
                }
                if self.study == StudyKind::MixtureProbe {
                    if p.donors.len() < 2 {
                        return Err(Error::Validation("mixture probe needs two donors".into()));
                    }
                    if p.ratio_grid.is_empty() || p.ratio_grid.iter().any(|r| !(0.0..=1.0).contains(r)) {
                        return Err(Error::Validation("ratio grid must be a nonempty subset of [0, 1]".into()));
                    }
                    if p.counts().iter().any(|&m| m > p.n) {
                        return Err(Error::Validation("target counts cannot exceed the budget n".into()));
                    }
                }
            }
        }
        if self.study == StudyKind::OtherHandling && self.other.is_none() {
            return Err(Error::Validation("other_handling needs [other] settings".into()));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<StudyReport> {
        run_trials(self)
    }
}

/// What happened to one cell in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed {
        metrics: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hyper: Option<Hyper>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        evaluation: Option<EvaluationReport>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        notes: Vec<String>,
    },
    NotApplicable {
        reason: String,
    },
    Failed {
        error: String,
    },
}

impl Outcome {
    pub fn metrics(&self) -> Option<&BTreeMap<String, f64>> {
        match self {
            Outcome::Completed { metrics, .. } => Some(metrics),
            _ => None,
        }
    }

    #[cfg(test)]
    pub(crate) fn completed(metrics: BTreeMap<String, f64>) -> Self {
        Outcome::Completed {
            metrics,
            hyper: None,
            evaluation: None,
            notes: Vec::new(),
        }
    }
}

/// Identifies a cell of the results table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub scenario: String,
    pub algorithm: String,
    /// Study-specific: strategy, donor, or probe curve.
    pub variant: String,
    /// Study-specific position along a curve (target row count).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<usize>,
}

impl CellKey {
    pub fn new(scenario: &str, algorithm: &str, variant: &str) -> Self {
        Self {
            scenario: scenario.into(),
            algorithm: algorithm.into(),
            variant: variant.into(),
            point: None,
        }
    }

    pub fn at(mut self, point: usize) -> Self {
        self.point = Some(point);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub key: CellKey,
    pub outcome: Outcome,
    /// Wall-clock seconds; kept out of the deterministic report.
    #[serde(skip)]
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Absent with fewer than two values.
    pub half_width: Option<f64>,
    pub n: usize,
    pub values: Vec<f64>,
}

impl MetricSummary {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width.unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width.unwrap_or(0.0)
    }

    pub fn overlaps(&self, other: &MetricSummary) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherSummary {
    pub statistic: f64,
    pub combined_p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Complete,
    /// Fewer than two trials succeeded.
    Incomplete,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub key: CellKey,
    pub status: CellStatus,
    pub completed: usize,
    pub failed: usize,
    pub not_applicable: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
    /// Fisher combination of the per-trial `tau_p` values, when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherSummary>,
}

impl CellSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: StudyKind,
    pub seed: u64,
    pub n_trials: usize,
    pub trial_seeds: Vec<u64>,
    /// Groups removed by the group filter.
    pub dropped_groups: Vec<String>,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialResult>,
}

impl StudyReport {
    pub fn cell(&self, scenario: &str, algorithm: &str, variant: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.key.scenario == scenario && c.key.algorithm == algorithm && c.key.variant == variant)
    }

    pub fn cell_at(&self, key: &CellKey) -> Option<&CellSummary> {
        self.cells.iter().find(|c| &c.key == key)
    }

    /// Total wall-clock seconds per trial.
    pub fn trial_durations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_trials];
        for t in &self.trials {
            out[t.trial] += t.duration_secs;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat table, one row per cell and metric.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "scenario",
            "algorithm",
            "variant",
            "point",
            "metric",
            "mean",
            "half_width",
            "n",
            "status",
            "combined_p",
        ])?;
        let status = |s: CellStatus| match s {
            CellStatus::Complete => "complete",
            CellStatus::Incomplete => "incomplete",
            CellStatus::NotApplicable => "not_applicable",
        };
        for c in &self.cells {
            let point = c.key.point.map(|p| p.to_string()).unwrap_or_default();
            let combined = c.fisher.map(|f| f.combined_p.to_string()).unwrap_or_default();
            if c.metrics.is_empty() {
                w.write_record([
                    c.key.scenario.as_str(),
                    &c.key.algorithm,
                    &c.key.variant,
                    &point,
                    "",
                    "",
                    "",
                    "0",
                    status(c.status),
                    "",
                ])?;
            }
            for (name, m) in &c.metrics {
                w.write_record([
                    c.key.scenario.clone(),
                    c.key.algorithm.clone(),
                    c.key.variant.clone(),
                    point.clone(),
                    name.clone(),
                    m.mean.to_string(),
                    m.half_width.map(|h| h.to_string()).unwrap_or_default(),
                    m.n.to_string(),
                    status(c.status).to_string(),
                    if name == "tau" { combined.clone() } else { String::new() },
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One trial's partitions, standardized with training statistics.
pub(crate) struct TrialData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// Loaded, filtered data shared by every trial.
pub(crate) struct Prepared<'a> {
    pub spec: &'a ExperimentSpec,
    pub data: Dataset,
    pub finest: GroupingScheme,
    pub scenarios: Vec<(Scenario, GroupingScheme)>,
}

impl Prepared<'_> {
    pub fn trial(&self, seed: u64) -> Result<TrialData> {
        let parts = split(&self.data, &SplitSpec::with_seed(seed))?;
        let (train, val, test) = if self.spec.standardize {
            let (mut out, _) = standardize(&parts.train, &[&parts.train, &parts.val, &parts.test])?;
            let test = out.pop().expect("three outputs");
            let val = out.pop().expect("three outputs");
            (out.pop().expect("three outputs"), val, test)
        } else {
            (parts.train, parts.val, parts.test)
        };
        Ok(TrialData { train, val, test, seed })
    }
}

pub(crate) fn labels(scheme: &GroupingScheme, ds: &Dataset) -> Result<GroupLabels> {
    scheme.assign(ds)
}

fn permute(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let mut labels = ds.labels().to_vec();
    labels.shuffle(&mut seed::rng_for(seed, 0x5eed));
    ds.with_labels(labels)
}

/// Run every trial of `spec` and aggregate.
pub fn run_trials(spec: &ExperimentSpec) -> Result<StudyReport> {
    spec.validate()?;
    let data = spec.data.load()?;
    run_on(spec, data)
}

/// Like [`run_trials`] on an already loaded dataset (the spec's data source
/// is ignored).
pub fn run_on(spec: &ExperimentSpec, data: Dataset) -> Result<StudyReport> {
    spec.validate()?;
    let mut data = if spec.permute_labels { permute(&data, spec.seed)? } else { data };
    let axes: Vec<&str> = spec.axes.iter().map(String::as_str).collect();
    let mut finest = GroupingScheme::conjunction(&data, &axes)?;
    let mut dropped = Vec::new();
    if let Some(filter) = &spec.filter {
        let (kept, gone) = filter_groups(&data, &finest, filter)?;
        data = kept;
        dropped = gone;
        finest = GroupingScheme::conjunction(&data, &axes)?;
    }
    let scenarios = spec
        .scenarios()
        .into_iter()
        .map(|s| {
            let scheme = s.scheme(&finest)?;
            Ok((s, scheme))
        })
        .collect::<Result<Vec<_>>>()?;
    let prepared = Prepared {
        spec,
        data,
        finest,
        scenarios,
    };
    studies::check(&prepared)?;

    let seeds: Vec<u64> = (0..spec.n_trials).map(|t| spec.seed.wrapping_add(t as u64)).collect();
    let per_trial: Vec<Vec<TrialResult>> = seeds
        .par_iter()
        .enumerate()
        .map(|(t, &s)| run_one(&prepared, t, s))
        .collect();
    let trials: Vec<TrialResult> = per_trial.into_iter().flatten().collect();
    Ok(StudyReport {
        study: spec.study,
        seed: spec.seed,
        n_trials: spec.n_trials,
        trial_seeds: seeds,
        dropped_groups: dropped,
        cells: aggregate(&trials),
        trials,
    })
}

fn run_one(prepared: &Prepared<'_>, trial: usize, seed: u64) -> Vec<TrialResult> {
    let started = Instant::now();
    let cells = match prepared.trial(seed) {
        Ok(data) => studies::run(prepared, &data),
        Err(e) => studies::keys(prepared)
            .into_iter()
            .map(|k| (k, Outcome::Failed { error: e.to_string() }, 0.0))
            .collect(),
    };
    let total = started.elapsed().as_secs_f64();
    let n = cells.len().max(1) as f64;
    cells
        .into_iter()
        .map(|(key, outcome, secs)| TrialResult {
            trial,
            seed,
            key,
            outcome,
            duration_secs: if secs > 0.0 { secs } else { total / n },
        })
        .collect()
}

/// Per-cell summaries in order of first appearance.
pub fn aggregate(trials: &[TrialResult]) -> Vec<CellSummary> {
    let mut order: Vec<&CellKey> = Vec::new();
    let mut by_key: BTreeMap<&CellKey, Vec<&TrialResult>> = BTreeMap::new();
    for t in trials {
        let entry = by_key.entry(&t.key).or_default();
        if entry.is_empty() {
            order.push(&t.key);
        }
        entry.push(t);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &by_key[key];
            let completed: Vec<&BTreeMap<String, f64>> = rows.iter().filter_map(|r| r.outcome.metrics()).collect();
            let failed = rows.iter().filter(|r| matches!(r.outcome, Outcome::Failed { .. })).count();
            let not_applicable = rows
                .iter()
                .filter(|r| matches!(r.outcome, Outcome::NotApplicable { .. }))
                .count();
            let mut names: Vec<&String> = completed.iter().flat_map(|m| m.keys()).collect();
            names.sort();
            names.dedup();
            let metrics = names
                .into_iter()
                .map(|name| {
                    let values: Vec<f64> = completed.iter().filter_map(|m| m.get(name).copied()).collect();
                    let summary = match confidence_interval(&values) {
                        Ok(ci) => MetricSummary {
                            mean: ci.mean,
                            half_width: Some(ci.half_width),
                            n: values.len(),
                            values,
                        },
                        Err(_) => MetricSummary {
                            mean: values.iter().sum::<f64>() / values.len() as f64,
                            half_width: None,
                            n: values.len(),
                            values,
                        },
                    };
                    (name.clone(), summary)
                })
                .collect::<BTreeMap<_, _>>();
            let fisher = metrics.get("tau_p").and_then(|m| {
                let ps: Vec<f64> = m.values.iter().map(|p| p.max(f64::MIN_POSITIVE)).collect();
                fisher_combine(&ps).ok().map(|(statistic, combined_p)| FisherSummary {
                    statistic,
                    combined_p,
                    significant: combined_p < SIGNIFICANCE,
                })
            });
            let status = if not_applicable == rows.len() {
                CellStatus::NotApplicable
            } else if completed.len() < 2 {
                CellStatus::Incomplete
            } else {
                CellStatus::Complete
            };
            CellSummary {
                key: key.clone(),
                status,
                completed: completed.len(),
                failed,
                not_applicable,
                metrics,
                fisher,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
