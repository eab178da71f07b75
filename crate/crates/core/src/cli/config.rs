//! The TOML run configuration.
//!
//! ```toml
//! axes = ["race", "sex"]
//! seed = 0
//! n_trials = 5
//!
//! [data.csv]                  # or [data.synthetic], never both
//! path = "adult.csv"          # relative to the config file
//! label = "income"
//! features = ["age", "hours"]
//! attributes = ["race", "sex"]
//!
//! [[scenarios]]
//! name = "coarse"
//! merge = { "Asian-F" = "API-F", "Pacific-F" = "API-F" }
//!
//! [[algorithms]]
//! kind = "rwt"
//! published_grid = true
//! hyper = { epochs = 50 }
//!
//! [study]
//! kind = "granularity"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CsvSchema, SyntheticSpec};
use crate::error::{Error, Result};
use crate::experiments::{DataSource, ExperimentSpec, OtherParams, ProbeParams, Scenario, StudyKind, DEFAULT_TRIALS};
use crate::fairness::{published_grid, AlgorithmSpec, Hyper};
use crate::groups::GroupFilter;
use crate::models::AlgorithmKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: CsvSchema,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub csv: Option<CsvSource>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

impl DataConfig {
    pub fn source(&self) -> Result<DataSource> {
        match (&self.csv, &self.synthetic) {
            (Some(c), None) => Ok(DataSource::Csv {
                path: c.path.clone(),
                schema: c.schema.clone(),
            }),
            (None, Some(s)) => Ok(DataSource::Synthetic(s.clone())),
            (Some(_), Some(_)) => Err(Error::Validation(
                "config names both [data.csv] and [data.synthetic]; exactly one data source is allowed".into(),
            )),
            (None, None) => Err(Error::Validation(
                "config names no data source; add [data.csv] or [data.synthetic]".into(),
            )),
        }
    }
}

/// One `[[algorithms]]` entry. `published_grid = true` starts from the published
/// grid; explicit `grid` keys replace its axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub kind: AlgorithmKind,
    #[serde(default)]
    pub published_grid: bool,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
}

impl AlgorithmEntry {
    pub fn spec(&self) -> AlgorithmSpec {
        let mut grid = if self.published_grid { published_grid(self.kind) } else { BTreeMap::new() };
        grid.extend(self.grid.clone());
        // Fixed values win over grid axes of the same name.
        for k in self.hyper.keys() {
            grid.remove(k);
        }
        AlgorithmSpec {
            kind: self.kind,
            hyper: self.hyper.clone(),
            grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    #[serde(default)]
    pub focus_groups: Vec<String>,
    #[serde(default)]
    pub permute_labels: bool,
    #[serde(default)]
    pub other: Option<OtherParams>,
    #[serde(default)]
    pub probe: Option<ProbeParams>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    /// Axes whose conjunction is the finest grouping.
    pub axes: Vec<String>,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default, rename = "algorithms")]
    pub algorithm_entries: Vec<AlgorithmEntry>,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "yes")]
    pub include_group_features: bool,
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default)]
    pub filter: Option<GroupFilter>,
    #[serde(skip)]
    pub algorithms: Vec<AlgorithmSpec>,
}

impl RunConfig {
    /// Parse TOML; a relative CSV path is resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(base), Some(csv)) = (base, cfg.data.csv.as_mut()) {
            if csv.path.is_relative() {
                csv.path = base.join(&csv.path);
            }
        }
        cfg.algorithms = cfg.algorithm_entries.iter().map(AlgorithmEntry::spec).collect();
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Structural checks; nothing is loaded or trained.
    pub fn validate(&self) -> Result<()> {
        match self.data.source()? {
            DataSource::Csv { path, schema } => {
                schema.validate()?;
                if !path.is_file() {
                    return Err(Error::Validation(format!("data file {} does not exist", path.display())));
                }
            }
            DataSource::Synthetic(spec) => spec.validate()?,
        }
        if self.axes.is_empty() {
            return Err(Error::Validation("`axes` must name at least one attribute".into()));
        }
        for a in &self.algorithms {
            a.validate()?;
        }
        Ok(())
    }

    /// The study this config describes.
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let study = self
            .study
            .as_ref()
            .ok_or_else(|| Error::Validation("config has no [study] section".into()))?;
        Ok(ExperimentSpec {
            study: study.kind,
            data: self.data.source()?,
            axes: self.axes.clone(),
            scenarios: self.scenarios.clone(),
            algorithms: self.algorithms.clone(),
            n_trials: self.n_trials,
            seed: self.seed,
            filter: self.filter,
            include_group_features: self.include_group_features,
            standardize: self.standardize,
            permute_labels: study.permute_labels,
            focus_groups: study.focus_groups.clone(),
            other: study.other.clone(),
            probe: study.probe.clone(),
        })
    }

    /// Stable serialization used for the manifest hash.
    pub fn canonical(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
