//! The fairness training algorithms and the validation grid search.
//!
//! | kind     | model                                   | fairness mechanism                      |
//! |----------|-----------------------------------------|-----------------------------------------|
//! | baseline | network                                 | none                                    |
//! | rwt      | network, resumed between rounds         | positive-example reweighting by TPR gap |
//! | rdc      | ensemble of networks (mean probability) | exponentiated-gradient reduction        |
//! | los      | network                                 | log max/min batch TPR ratio penalty     |
//! | grp      | logistic + per-group logit offsets      | plugin correction to within slack `nu`  |
//! | gry      | linear regressions (mean hard output)   | learner/auditor fictitious play         |

mod gerry;
mod los;
mod plugin;
mod reductions;
mod reweight;
mod search;

pub use gerry::train_gry;
pub use los::{train_los, LosLoss, LOS_EPSILON};
pub use plugin::train_grp;
pub use reductions::train_rdc;
pub use reweight::{train_rwt, train_rwt_detailed, RwtOutcome};
pub use search::{grid_search, tuning_objective, GridPoint, GridResult, TuningObjective};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{train_mlp, AlgorithmKind, FairPredictor, MlpConfig, TrainingSet};

pub type Hyper = BTreeMap<String, f64>;

/// Parameters each algorithm accepts.
pub fn parameter_names(kind: AlgorithmKind) -> &'static [&'static str] {
    match kind {
        AlgorithmKind::Baseline => &["batch_size", "epochs", "learning_rate"],
        AlgorithmKind::Rwt => &["batch_size", "epochs", "eta", "iterations", "learning_rate"],
        AlgorithmKind::Rdc => &["batch_size", "bound", "epochs", "eps", "eta0", "iterations", "learning_rate"],
        AlgorithmKind::Los => &["batch_size", "epochs", "lambda", "learning_rate"],
        AlgorithmKind::Grp => &[
            "base_batch_size",
            "base_epochs",
            "base_learning_rate",
            "bound",
            "epochs",
            "learning_rate",
            "nu",
        ],
        AlgorithmKind::Gry => &["c", "gamma", "iterations"],
        AlgorithmKind::Logistic | AlgorithmKind::Linear => &[],
    }
}

/// Values used for any parameter neither fixed nor searched.
pub fn default_hyper(kind: AlgorithmKind) -> Hyper {
    let pairs: &[(&str, f64)] = match kind {
        AlgorithmKind::Baseline => &[("batch_size", 64.0), ("epochs", 50.0), ("learning_rate", 0.001)],
        AlgorithmKind::Rwt => &[
            ("batch_size", 64.0),
            ("epochs", 100.0),
            ("eta", 0.1),
            ("iterations", 10.0),
            ("learning_rate", 0.001),
        ],
        AlgorithmKind::Rdc => &[
            ("batch_size", 256.0),
            ("bound", 100.0),
            ("epochs", 50.0),
            ("eps", 0.01),
            ("eta0", 2.0),
            ("iterations", 10.0),
            ("learning_rate", 0.005),
        ],
        AlgorithmKind::Los => &[
            ("batch_size", 1024.0),
            ("epochs", 200.0),
            ("lambda", 0.1),
            ("learning_rate", 0.005),
        ],
        AlgorithmKind::Grp => &[
            ("base_batch_size", 256.0),
            ("base_epochs", 100.0),
            ("base_learning_rate", 0.01),
            ("bound", 50.0),
            ("epochs", 10000.0),
            ("learning_rate", 0.01),
            ("nu", 0.01),
        ],
        AlgorithmKind::Gry => &[("c", 10.0), ("gamma", 0.01), ("iterations", 50.0)],
        AlgorithmKind::Logistic | AlgorithmKind::Linear => &[],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// The published search spaces.
pub fn published_grid(kind: AlgorithmKind) -> BTreeMap<String, Vec<f64>> {
    let pairs: Vec<(&str, Vec<f64>)> = match kind {
        AlgorithmKind::Baseline => vec![("epochs", vec![50.0, 100.0, 150.0]), ("learning_rate", vec![0.001, 0.005])],
        AlgorithmKind::Rwt => vec![("epochs", vec![100.0, 150.0]), ("eta", vec![0.1, 0.2, 0.5, 1.0])],
        AlgorithmKind::Rdc => vec![
            ("batch_size", vec![256.0, 512.0, 1024.0, 2048.0]),
            ("epochs", vec![50.0, 100.0, 200.0]),
            ("iterations", vec![10.0, 20.0, 50.0]),
        ],
        AlgorithmKind::Los => vec![("epochs", vec![200.0, 250.0, 300.0]), ("lambda", vec![0.01, 0.5, 0.1])],
        AlgorithmKind::Grp => vec![("nu", vec![0.001, 0.003, 0.01, 0.03, 0.1])],
        AlgorithmKind::Gry => vec![
            ("c", vec![5.0, 10.0, 20.0]),
            ("gamma", vec![1e-3, 5e-3, 1e-2]),
            ("iterations", vec![50.0, 100.0, 200.0]),
        ],
        AlgorithmKind::Logistic | AlgorithmKind::Linear => vec![],
    };
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// An algorithm with fixed parameters and an optional search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind) -> Self {
        Self {
            kind,
            hyper: Hyper::new(),
            grid: BTreeMap::new(),
        }
    }

    /// The algorithm with its published grid.
    pub fn published(kind: AlgorithmKind) -> Self {
        Self {
            grid: published_grid(kind),
            ..Self::new(kind)
        }
    }

    pub fn with_hyper(mut self, name: &str, value: f64) -> Self {
        self.hyper.insert(name.to_string(), value);
        self
    }

    pub fn with_grid(mut self, name: &str, values: &[f64]) -> Self {
        self.grid.insert(name.to_string(), values.to_vec());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let names = parameter_names(self.kind);
        if names.is_empty() {
            return Err(Error::InvalidArgument(format!("{} is not a fairness algorithm", self.kind)));
        }
        for key in self.hyper.keys().chain(self.grid.keys()) {
            if !names.contains(&key.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "{} has no parameter `{key}` (expected one of {})",
                    self.kind,
                    names.join(", ")
                )));
            }
        }
        for (key, values) in &self.grid {
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!("grid for `{key}` is empty")));
            }
        }
        Ok(())
    }

    /// Every grid point in order, the last-named parameter varying fastest,
    /// each merged over the defaults and fixed parameters.
    pub fn grid_points(&self) -> Vec<Hyper> {
        let mut base = default_hyper(self.kind);
        base.extend(self.hyper.iter().map(|(k, v)| (k.clone(), *v)));
        let mut points = vec![base];
        for (key, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(key.clone(), *v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn grid_size(&self) -> usize {
        self.grid.values().map(Vec::len).product()
    }
}

/// Typed access to a resolved parameter map.
pub(crate) struct Params<'a> {
    kind: AlgorithmKind,
    map: &'a Hyper,
}

impl<'a> Params<'a> {
    pub(crate) fn new(kind: AlgorithmKind, map: &'a Hyper) -> Self {
        Self { kind, map }
    }

    pub(crate) fn real(&self, key: &str) -> Result<f64> {
        let v = self
            .map
            .get(key)
            .copied()
            .or_else(|| default_hyper(self.kind).get(key).copied())
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs parameter `{key}`", self.kind)))?;
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("`{key}` must be finite")));
        }
        Ok(v)
    }

    pub(crate) fn non_negative(&self, key: &str) -> Result<f64> {
        let v = self.real(key)?;
        if v < 0.0 {
            return Err(Error::InvalidArgument(format!("`{key}` must be non-negative, got {v}")));
        }
        Ok(v)
    }

    pub(crate) fn positive(&self, key: &str) -> Result<f64> {
        let v = self.real(key)?;
        if v <= 0.0 {
            return Err(Error::InvalidArgument(format!("`{key}` must be positive, got {v}")));
        }
        Ok(v)
    }

    pub(crate) fn count(&self, key: &str) -> Result<usize> {
        let v = self.real(key)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!("`{key}` must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }

    pub(crate) fn mlp(&self, seed: u64) -> Result<MlpConfig> {
        Ok(MlpConfig {
            batch_size: self.count("batch_size")?,
            learning_rate: self.positive("learning_rate")?,
            epochs: self.count("epochs")?,
            seed,
            ..MlpConfig::default()
        })
    }

    /// The full resolved map, defaults included, for recording on a model.
    pub(crate) fn resolved(&self) -> Hyper {
        let mut out = default_hyper(self.kind);
        out.extend(self.map.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }
}

/// Uniformly weighted network.
pub fn train_baseline(set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<FairPredictor> {
    let params = Params::new(AlgorithmKind::Baseline, hyper);
    let cfg = params.mlp(seed)?;
    train_mlp(set, &vec![1.0; set.len()], &cfg)
}

/// Train `kind` with one parameter setting.
pub fn train_algorithm(kind: AlgorithmKind, set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<FairPredictor> {
    match kind {
        AlgorithmKind::Baseline => train_baseline(set, hyper, seed),
        AlgorithmKind::Rwt => train_rwt(set, hyper, seed),
        AlgorithmKind::Rdc => train_rdc(set, hyper, seed),
        AlgorithmKind::Los => train_los(set, hyper, seed),
        AlgorithmKind::Grp => train_grp(set, hyper, seed),
        AlgorithmKind::Gry => train_gry(set, hyper, seed),
        AlgorithmKind::Logistic | AlgorithmKind::Linear => Err(Error::InvalidArgument(format!(
            "{kind} is a component model, not a fairness algorithm"
        ))),
    }
}

/// Soft TPR of each training group (`None` without positives) and overall.
pub(crate) fn train_tprs(set: &TrainingSet<'_>, probs: &[f64]) -> (Vec<Option<f64>>, f64) {
    let k = set.n_groups();
    let mut sum = vec![0.0; k];
    let mut pos = vec![0usize; k];
    let (mut all, mut n_pos) = (0.0, 0usize);
    for (i, (&y, &p)) in set.labels().iter().zip(probs).enumerate() {
        if y == 1 {
            let g = set.group_of(i);
            sum[g] += p;
            pos[g] += 1;
            all += p;
            n_pos += 1;
        }
    }
    let tprs = sum
        .iter()
        .zip(&pos)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    (tprs, all / n_pos.max(1) as f64)
}
