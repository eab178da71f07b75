//! Trainable predictors and the [`FairPredictor`] wrapper every training
//! algorithm returns.

mod linear;
mod mlp;

pub use linear::{LinearModel, RIDGE};
pub use mlp::{sigmoid, softplus, Adam, BatchLoss, Mlp, Schedule, WeightedBce};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::groups::GroupLabels;
use crate::seed;

/// Which procedure produced a predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Baseline,
    Rwt,
    Rdc,
    Los,
    Grp,
    Gry,
    Logistic,
    Linear,
}

impl AlgorithmKind {
    pub const FAIRNESS: [AlgorithmKind; 6] = [
        AlgorithmKind::Baseline,
        AlgorithmKind::Rwt,
        AlgorithmKind::Rdc,
        AlgorithmKind::Los,
        AlgorithmKind::Grp,
        AlgorithmKind::Gry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Baseline => "baseline",
            AlgorithmKind::Rwt => "rwt",
            AlgorithmKind::Rdc => "rdc",
            AlgorithmKind::Los => "los",
            AlgorithmKind::Grp => "grp",
            AlgorithmKind::Gry => "gry",
            AlgorithmKind::Logistic => "logistic",
            AlgorithmKind::Linear => "linear",
        }
    }

    /// Algorithms whose output depends on a per-group parameter learned at
    /// training time, so rows of an unseen group cannot be scored.
    pub fn requires_known_groups(self) -> bool {
        matches!(self, AlgorithmKind::Grp | AlgorithmKind::Gry)
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        [
            AlgorithmKind::Baseline,
            AlgorithmKind::Rwt,
            AlgorithmKind::Rdc,
            AlgorithmKind::Los,
            AlgorithmKind::Grp,
            AlgorithmKind::Gry,
            AlgorithmKind::Logistic,
            AlgorithmKind::Linear,
        ]
        .into_iter()
        .find(|k| k.name() == lower)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

/// Turns dataset rows into model inputs: the feature row, optionally followed
/// by a one-hot of the row's training group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEncoder {
    pub groups: Vec<String>,
    pub one_hot: bool,
}

impl GroupEncoder {
    pub fn new(groups: &GroupLabels, one_hot: bool) -> Self {
        Self {
            groups: groups.ids().to_vec(),
            one_hot,
        }
    }

    pub fn input_dim(&self, feature_dim: usize) -> usize {
        feature_dim + if self.one_hot { self.groups.len() } else { 0 }
    }

    /// Encoded inputs and the training-group index of each row (`None` for
    /// groups unseen at training; their one-hot block is all zeros).
    pub fn encode(&self, ds: &Dataset, groups: &GroupLabels) -> Result<(Matrix, Vec<Option<usize>>)> {
        if groups.len() != ds.len() {
            return Err(Error::InvalidArgument(format!(
                "{} group labels for {} rows",
                groups.len(),
                ds.len()
            )));
        }
        let remap: Vec<Option<usize>> = groups
            .ids()
            .iter()
            .map(|id| self.groups.iter().position(|g| g == id))
            .collect();
        let idx: Vec<Option<usize>> = (0..ds.len()).map(|i| remap[groups.index_of_row(i)]).collect();
        if !self.one_hot {
            return Ok((ds.features().clone(), idx));
        }
        let d = ds.dim();
        let width = self.input_dim(d);
        let mut data = vec![0.0; ds.len() * width];
        for (i, g) in idx.iter().enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            row[..d].copy_from_slice(ds.features().row(i));
            if let Some(g) = g {
                row[d + g] = 1.0;
            }
        }
        Ok((Matrix::new(ds.len(), width, data)?, idx))
    }
}

/// A dataset with group labels, already encoded for training.
#[derive(Debug, Clone)]
pub struct TrainingSet<'a> {
    pub data: &'a Dataset,
    pub groups: &'a GroupLabels,
    pub encoder: GroupEncoder,
    pub x: Matrix,
}

impl<'a> TrainingSet<'a> {
    pub fn new(data: &'a Dataset, groups: &'a GroupLabels, include_group_features: bool) -> Result<Self> {
        let encoder = GroupEncoder::new(groups, include_group_features);
        let (x, _) = encoder.encode(data, groups)?;
        Ok(Self {
            data,
            groups,
            encoder,
            x,
        })
    }

    pub fn labels(&self) -> &[u8] {
        self.data.labels()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Training-group index of row `i`.
    pub fn group_of(&self, i: usize) -> usize {
        self.groups.index_of_row(i)
    }

    pub fn n_groups(&self) -> usize {
        self.groups.n_groups()
    }

    /// Positive examples per training group.
    pub fn positives_per_group(&self) -> Vec<usize> {
        let mut pos = vec![0usize; self.n_groups()];
        for (i, &y) in self.labels().iter().enumerate() {
            pos[self.group_of(i)] += y as usize;
        }
        pos
    }

    /// Predictions of `model` on these rows.
    pub fn predict(&self, model: &FairPredictor) -> Vec<f64> {
        let idx: Vec<Option<usize>> = (0..self.len()).map(|i| Some(self.group_of(i))).collect();
        model.predict_encoded(&self.x, &idx)
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let pos = self.data.positives();
        if pos == 0 || pos == self.len() {
            return Err(Error::Validation(
                "training data needs at least one positive and one negative label".into(),
            ));
        }
        Ok(())
    }

    /// Error naming the first group without a positive example.
    pub(crate) fn require_positives_per_group(&self) -> Result<()> {
        let pos = self.positives_per_group();
        let counts = self.groups.counts();
        for (g, id) in self.groups.ids().iter().enumerate() {
            if counts[g] > 0 && pos[g] == 0 {
                return Err(Error::NoPositives(id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_sizes: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![30, 30],
            batch_size: 64,
            learning_rate: 0.001,
            epochs: 50,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub(crate) enum Model {
    /// A single network; resumable when the optimizer state is kept.
    Network {
        net: Mlp,
        adam: Option<Adam>,
        batch_size: usize,
        learning_rate: f64,
    },
    /// Mean of the members' probabilities.
    Ensemble { members: Vec<Mlp> },
    /// Base network plus an additive logit shift per training group.
    Corrected { base: Mlp, offsets: Vec<f64> },
    /// Mean of thresholded linear scores.
    HardVote { members: Vec<LinearModel> },
    /// One thresholded linear scorer.
    Linear { model: LinearModel },
}

/// A trained model mapping rows to probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairPredictor {
    pub algorithm: AlgorithmKind,
    pub hyper: BTreeMap<String, f64>,
    pub meta: TrainingMeta,
    pub encoder: GroupEncoder,
    model: Model,
}

pub const MODEL_FORMAT: &str = "intersectional-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format: String,
    version: u32,
    predictor: FairPredictor,
}

impl FairPredictor {
    pub(crate) fn new(
        algorithm: AlgorithmKind,
        hyper: BTreeMap<String, f64>,
        meta: TrainingMeta,
        encoder: GroupEncoder,
        model: Model,
    ) -> Self {
        Self {
            algorithm,
            hyper,
            meta,
            encoder,
            model,
        }
    }

    #[cfg(test)]
    pub(crate) fn model(&self) -> &Model {
        &self.model
    }

    pub fn is_resumable(&self) -> bool {
        matches!(self.model, Model::Network { adam: Some(_), .. })
    }

    /// Number of members in an ensemble-style model (1 otherwise).
    pub fn ensemble_size(&self) -> usize {
        match &self.model {
            Model::Ensemble { members } => members.len(),
            Model::HardVote { members } => members.len(),
            _ => 1,
        }
    }

    /// Network parameters of single-network models.
    pub fn network(&self) -> Option<&Mlp> {
        match &self.model {
            Model::Network { net, .. } => Some(net),
            Model::Corrected { base, .. } => Some(base),
            _ => None,
        }
    }

    /// Per-group logit corrections of a corrected model, keyed by group id.
    pub fn group_offsets(&self) -> Option<Vec<(String, f64)>> {
        match &self.model {
            Model::Corrected { offsets, .. } => Some(
                self.encoder
                    .groups
                    .iter()
                    .cloned()
                    .zip(offsets.iter().copied())
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Probability for every row of `ds`, with `groups` naming each row's
    /// group in the training grouping scheme.
    pub fn predict(&self, ds: &Dataset, groups: &GroupLabels) -> Result<Vec<f64>> {
        let (x, idx) = self.encoder.encode(ds, groups)?;
        if self.algorithm.requires_known_groups() || matches!(self.model, Model::Corrected { .. }) {
            if let Some(i) = idx.iter().position(Option::is_none) {
                return Err(Error::UnseenGroup(groups.id_of_row(i).to_string()));
            }
        }
        Ok(self.predict_encoded(&x, &idx))
    }

    pub(crate) fn predict_encoded(&self, x: &Matrix, idx: &[Option<usize>]) -> Vec<f64> {
        let out: Vec<f64> = match &self.model {
            Model::Network { net, .. } => net.predict_matrix(x),
            Model::Ensemble { members } => {
                let mut acc = vec![0.0; x.rows()];
                for m in members {
                    for (a, p) in acc.iter_mut().zip(m.predict_matrix(x)) {
                        *a += p;
                    }
                }
                acc.iter().map(|a| a / members.len() as f64).collect()
            }
            Model::Corrected { base, offsets } => (0..x.rows())
                .map(|i| sigmoid(base.logit(x.row(i)) + idx[i].map_or(0.0, |g| offsets[g])))
                .collect(),
            Model::HardVote { members } => (0..x.rows())
                .map(|i| members.iter().map(|m| m.hard(x.row(i))).sum::<f64>() / members.len() as f64)
                .collect(),
            Model::Linear { model } => (0..x.rows()).map(|i| model.hard(x.row(i))).collect(),
        };
        out.into_iter().map(|p| p.clamp(0.0, 1.0)).collect()
    }

    /// Unthresholded scores of a linear model.
    pub fn raw_scores(&self, ds: &Dataset, groups: &GroupLabels) -> Result<Vec<f64>> {
        let Model::Linear { model } = &self.model else {
            return Err(Error::InvalidArgument("raw scores exist only for linear models".into()));
        };
        let (x, _) = self.encoder.encode(ds, groups)?;
        Ok((0..x.rows()).map(|i| model.score(x.row(i))).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelEnvelope {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            predictor: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: ModelEnvelope = serde_json::from_str(text)?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model blob {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.predictor)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Train a fresh network on `objective`, returning it with optimizer state.
pub(crate) fn fit_network(set: &TrainingSet<'_>, objective: &dyn BatchLoss, cfg: &MlpConfig) -> Result<(Mlp, Adam)> {
    cfg.validate()?;
    let mut net = Mlp::new(set.x.cols(), &cfg.hidden_sizes, &mut seed::rng(cfg.seed));
    let mut adam = Adam::new(net.params().len());
    mlp::run_epochs(
        &mut net,
        &mut adam,
        &set.x,
        objective,
        &Schedule {
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            seed: cfg.seed,
            first_epoch: 0,
        },
    )?;
    Ok((net, adam))
}

fn check_weights(set: &TrainingSet<'_>, weights: &[f64]) -> Result<()> {
    if weights.len() != set.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} rows",
            weights.len(),
            set.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    Ok(())
}

pub(crate) fn mlp_hyper(cfg: &MlpConfig) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("batch_size".to_string(), cfg.batch_size as f64),
        ("epochs".to_string(), cfg.epochs as f64),
        ("learning_rate".to_string(), cfg.learning_rate),
    ])
}

/// Weighted binary cross-entropy network with the configured hidden layers.
pub fn train_mlp(set: &TrainingSet<'_>, weights: &[f64], cfg: &MlpConfig) -> Result<FairPredictor> {
    check_weights(set, weights)?;
    set.require_both_classes()?;
    let objective = WeightedBce {
        labels: set.labels(),
        weights,
    };
    let (net, adam) = fit_network(set, &objective, cfg)?;
    Ok(FairPredictor::new(
        AlgorithmKind::Baseline,
        mlp_hyper(cfg),
        TrainingMeta {
            seed: cfg.seed,
            epochs_run: cfg.epochs,
            iterations: 1,
        },
        set.encoder.clone(),
        Model::Network {
            net,
            adam: Some(adam),
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
        },
    ))
}

/// Resume a network from its current parameters and optimizer state with new
/// sample weights.
pub fn continue_training(
    model: &FairPredictor,
    set: &TrainingSet<'_>,
    weights: &[f64],
    epochs: usize,
) -> Result<FairPredictor> {
    continue_with(model, set, &WeightedBce { labels: set.labels(), weights }, weights, epochs)
}

pub(crate) fn continue_with(
    model: &FairPredictor,
    set: &TrainingSet<'_>,
    objective: &dyn BatchLoss,
    weights: &[f64],
    epochs: usize,
) -> Result<FairPredictor> {
    let Model::Network {
        net,
        adam: Some(adam),
        batch_size,
        learning_rate,
    } = &model.model
    else {
        return Err(Error::NotResumable(format!(
            "{} predictors cannot continue training",
            model.algorithm
        )));
    };
    if set.encoder != model.encoder {
        return Err(Error::InvalidArgument(
            "training set groups differ from the model's".into(),
        ));
    }
    check_weights(set, weights)?;
    let mut net = net.clone();
    let mut adam = adam.clone();
    mlp::run_epochs(
        &mut net,
        &mut adam,
        &set.x,
        objective,
        &Schedule {
            batch_size: *batch_size,
            learning_rate: *learning_rate,
            epochs,
            seed: model.meta.seed,
            first_epoch: model.meta.epochs_run,
        },
    )?;
    let mut out = model.clone();
    out.meta.epochs_run += epochs;
    out.model = Model::Network {
        net,
        adam: Some(adam),
        batch_size: *batch_size,
        learning_rate: *learning_rate,
    };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 256,
            seed: 0,
        }
    }
}

/// Logistic regression: a network with no hidden layer, zero-initialized.
pub fn train_logistic(set: &TrainingSet<'_>, weights: &[f64], cfg: &LogisticConfig) -> Result<FairPredictor> {
    check_weights(set, weights)?;
    let mut net = Mlp::zeros(set.x.cols(), &[]);
    let mut adam = Adam::new(net.params().len());
    if cfg.epochs > 0 {
        set.require_both_classes()?;
        mlp::run_epochs(
            &mut net,
            &mut adam,
            &set.x,
            &WeightedBce {
                labels: set.labels(),
                weights,
            },
            &Schedule {
                batch_size: cfg.batch_size,
                learning_rate: cfg.learning_rate,
                epochs: cfg.epochs,
                seed: cfg.seed,
                first_epoch: 0,
            },
        )?;
    }
    Ok(FairPredictor::new(
        AlgorithmKind::Logistic,
        BTreeMap::from([
            ("batch_size".to_string(), cfg.batch_size as f64),
            ("epochs".to_string(), cfg.epochs as f64),
            ("learning_rate".to_string(), cfg.learning_rate),
        ]),
        TrainingMeta {
            seed: cfg.seed,
            epochs_run: cfg.epochs,
            iterations: 1,
        },
        set.encoder.clone(),
        Model::Network {
            net,
            adam: Some(adam),
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
        },
    ))
}

/// Ridge least squares of real-valued `cost_labels`; predictions are the
/// score thresholded at 0.5.
pub fn train_linear_cost_sensitive(set: &TrainingSet<'_>, cost_labels: &[f64]) -> Result<FairPredictor> {
    let model = LinearModel::fit(&set.x, cost_labels, RIDGE)?;
    Ok(FairPredictor::new(
        AlgorithmKind::Linear,
        BTreeMap::from([("ridge".to_string(), RIDGE)]),
        TrainingMeta {
            seed: 0,
            epochs_run: 0,
            iterations: 1,
        },
        set.encoder.clone(),
        Model::Linear { model },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Axis;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset(rows: Vec<Vec<f64>>, labels: Vec<u8>, groups: &[&str]) -> (Dataset, GroupLabels) {
        let n = rows.len();
        let d = rows[0].len();
        let mut cats: Vec<String> = groups.iter().map(|g| g.to_string()).collect();
        cats.sort();
        cats.dedup();
        let ds = Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            (0..d).map(|j| format!("x{j}")).collect(),
            labels,
            vec![Axis::new("g", cats.clone())],
            groups.iter().map(|g| vec![cats.iter().position(|c| c == g).unwrap()]).collect(),
        )
        .unwrap();
        assert_eq!(ds.len(), n);
        let labels = GroupLabels::from_row_ids(groups);
        (ds, labels)
    }

    fn separable(n: usize, seed: u64) -> (Dataset, GroupLabels) {
        let mut rng = seed::rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u8;
            let shift = if y == 1 { 1.5 } else { -1.5 };
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![a * 0.5 + shift, b * 0.5 + shift]);
            labels.push(y);
            groups.push(if rng.random::<bool>() { "a" } else { "b" });
        }
        dataset(rows, labels, &groups)
    }

    fn soft_acc(y: &[u8], p: &[f64]) -> f64 {
        y.iter()
            .zip(p)
            .map(|(&y, &p)| if y == 1 { p } else { 1.0 - p })
            .sum::<f64>()
            / y.len() as f64
    }

    #[test]
    fn encoder_appends_group_one_hot() {
        let (ds, g) = dataset(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0], &["b", "a", "b"]);
        let enc = GroupEncoder::new(&g, true);
        let (x, idx) = enc.encode(&ds, &g).unwrap();
        assert_eq!(x.cols(), 3);
        assert_eq!(x.row(0), &[1.0, 1.0, 0.0]);
        assert_eq!(x.row(1), &[2.0, 0.0, 1.0]);
        assert_eq!(idx, vec![Some(0), Some(1), Some(0)]);

        let other = GroupLabels::from_row_ids(&["c", "a", "b"]);
        let (x, idx) = enc.encode(&ds, &other).unwrap();
        assert_eq!(x.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(idx[0], None);

        let plain = GroupEncoder::new(&g, false);
        assert_eq!(plain.encode(&ds, &g).unwrap().0.cols(), 1);
    }

    #[test]
    fn mlp_learns_separable_data() {
        let (train, tg) = separable(2000, 1);
        let (test, sg) = separable(1000, 2);
        let set = TrainingSet::new(&train, &tg, false).unwrap();
        let cfg = MlpConfig {
            epochs: 20,
            learning_rate: 0.005,
            seed: 3,
            ..MlpConfig::default()
        };
        let model = train_mlp(&set, &vec![1.0; train.len()], &cfg).unwrap();
        let p = model.predict(&test, &sg).unwrap();
        assert!(p.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(soft_acc(test.labels(), &p) >= 0.9);
    }

    #[test]
    fn same_seed_same_parameters() {
        let (train, tg) = separable(300, 4);
        let set = TrainingSet::new(&train, &tg, true).unwrap();
        let cfg = MlpConfig {
            epochs: 3,
            seed: 9,
            ..MlpConfig::default()
        };
        let w = vec![1.0; train.len()];
        let a = train_mlp(&set, &w, &cfg).unwrap();
        let b = train_mlp(&set, &w, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_mlp(&set, &w, &MlpConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.network(), c.network());
    }

    #[test]
    fn single_weighted_row_dominates() {
        let (train, tg) = dataset(
            vec![vec![1.0], vec![1.1], vec![0.9], vec![1.05]],
            vec![1, 0, 0, 0],
            &["a"; 4],
        );
        let set = TrainingSet::new(&train, &tg, false).unwrap();
        let cfg = MlpConfig {
            epochs: 300,
            batch_size: 4,
            learning_rate: 0.01,
            seed: 1,
            ..MlpConfig::default()
        };
        let model = train_mlp(&set, &[1.0, 0.0, 0.0, 0.0], &cfg).unwrap();
        let p = model.predict(&train, &tg).unwrap();
        assert!(p[0] > 0.9, "{p:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let (train, tg) = separable(50, 5);
        let set = TrainingSet::new(&train, &tg, false).unwrap();
        let cfg = MlpConfig::default();
        assert!(train_mlp(&set, &[1.0; 3], &cfg).is_err());
        let mut w = vec![1.0; 50];
        w[0] = -1.0;
        assert!(train_mlp(&set, &w, &cfg).is_err());
        let ones = train.with_labels(vec![1; 50]).unwrap();
        let set = TrainingSet::new(&ones, &tg, false).unwrap();
        assert!(train_mlp(&set, &[1.0; 50], &cfg).is_err());
        assert!(MlpConfig { batch_size: 0, ..cfg.clone() }.validate().is_err());
        assert!(MlpConfig { epochs: 0, ..cfg.clone() }.validate().is_err());
        assert!(MlpConfig { learning_rate: 0.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let (train, tg) = separable(200, 6);
        let scaled: Vec<Vec<f64>> = (0..train.len())
            .map(|i| train.features().row(i).iter().map(|v| v * 1e150).collect())
            .collect();
        let train = train.with_features(Matrix::from_rows(&scaled).unwrap()).unwrap();
        let set = TrainingSet::new(&train, &tg, false).unwrap();
        let cfg = MlpConfig {
            learning_rate: 1e150,
            epochs: 5,
            ..MlpConfig::default()
        };
        assert!(matches!(
            train_mlp(&set, &vec![1.0; train.len()], &cfg),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn continue_with_zero_epochs_is_noop() {
        let (train, tg) = separable(200, 7);
        let set = TrainingSet::new(&train, &tg, true).unwrap();
        let w = vec![1.0; train.len()];
        let m = train_mlp(&set, &w, &MlpConfig { epochs: 2, ..MlpConfig::default() }).unwrap();
        let same = continue_training(&m, &set, &w, 0).unwrap();
        assert_eq!(m, same);
        let more = continue_training(&m, &set, &w, 1).unwrap();
        assert_eq!(more.meta.epochs_run, 3);
        assert_ne!(more.network(), m.network());
    }

    #[test]
    fn continuation_matches_uninterrupted_run() {
        let (train, tg) = separable(200, 8);
        let set = TrainingSet::new(&train, &tg, true).unwrap();
        let w = vec![1.0; train.len()];
        let cfg = MlpConfig { epochs: 2, ..MlpConfig::default() };
        let two = train_mlp(&set, &w, &cfg).unwrap();
        let four = train_mlp(&set, &w, &MlpConfig { epochs: 4, ..cfg }).unwrap();
        let resumed = continue_training(&two, &set, &w, 2).unwrap();
        assert_eq!(resumed.network(), four.network());
    }

    #[test]
    fn linear_models_cannot_continue() {
        let (train, tg) = separable(50, 9);
        let set = TrainingSet::new(&train, &tg, false).unwrap();
        let targets: Vec<f64> = train.labels().iter().map(|&y| y as f64).collect();
        let lin = train_linear_cost_sensitive(&set, &targets).unwrap();
        assert!(!lin.is_resumable());
        assert!(matches!(
            continue_training(&lin, &set, &[1.0; 50], 1),
            Err(Error::NotResumable(_))
        ));
    }

    #[test]
    fn logistic_zero_epochs_is_half() {
        let (train, tg) = separable(40, 10);
        let set = TrainingSet::new(&train, &tg, true).unwrap();
        let m = train_logistic(&set, &[1.0; 40], &LogisticConfig { epochs: 0, ..LogisticConfig::default() }).unwrap();
        assert!(m.predict(&train, &tg).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn logistic_recovers_sign() {
        let mut rng = seed::rng(11);
        let xs: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let labels: Vec<u8> = xs.iter().map(|&x| (x > 0.0) as u8).collect();
        let (ds, g) = dataset(rows, labels, &["a"; 2000]);
        let set = TrainingSet::new(&ds, &g, false).unwrap();
        let m = train_logistic(&set, &[1.0; 2000], &LogisticConfig::default()).unwrap();
        assert!(m.network().unwrap().params()[0] > 0.0);
    }

    #[test]
    fn linear_fit_pins() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 4.0]).collect();
        let twice: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let labels = (0..20).map(|i| (i % 2) as u8).collect();
        let (ds, g) = dataset(rows, labels, &["a"; 20]);
        let set = TrainingSet::new(&ds, &g, false).unwrap();
        let m = train_linear_cost_sensitive(&set, &twice).unwrap();
        let Model::Linear { model } = m.model() else { panic!() };
        assert!((model.coef[0] - 2.0).abs() < 1e-6);

        let m = train_linear_cost_sensitive(&set, &[0.7; 20]).unwrap();
        let Model::Linear { model } = m.model() else { panic!() };
        assert!((model.intercept - 0.7).abs() < 1e-6);
        assert!(m.predict(&ds, &g).unwrap().iter().all(|&p| p == 1.0));
        assert!(m.raw_scores(&ds, &g).unwrap().iter().all(|s| (s - 0.7).abs() < 1e-6));
    }

    #[test]
    fn corrected_model_rejects_unseen_group() {
        let (ds, g) = dataset(vec![vec![0.0], vec![1.0]], vec![0, 1], &["a", "b"]);
        let enc = GroupEncoder::new(&g, false);
        let p = FairPredictor::new(
            AlgorithmKind::Grp,
            BTreeMap::new(),
            TrainingMeta { seed: 0, epochs_run: 0, iterations: 1 },
            enc,
            Model::Corrected { base: Mlp::zeros(1, &[]), offsets: vec![0.0, 100.0] },
        );
        let out = p.predict(&ds, &g).unwrap();
        assert_eq!(out[0], 0.5);
        assert!(out[1] > 0.99);
        let unseen = GroupLabels::from_row_ids(&["a", "z"]);
        assert!(matches!(p.predict(&ds, &unseen), Err(Error::UnseenGroup(id)) if id == "z"));
    }

    #[test]
    fn ensemble_of_identical_members_equals_member() {
        let (train, tg) = separable(100, 12);
        let set = TrainingSet::new(&train, &tg, false).unwrap();
        let single = train_mlp(&set, &[1.0; 100], &MlpConfig { epochs: 2, ..MlpConfig::default() }).unwrap();
        let net = single.network().unwrap().clone();
        let ens = FairPredictor::new(
            AlgorithmKind::Rdc,
            BTreeMap::new(),
            single.meta.clone(),
            single.encoder.clone(),
            Model::Ensemble { members: vec![net.clone(), net.clone(), net] },
        );
        let a = single.predict(&train, &tg).unwrap();
        let b = ens.predict(&train, &tg).unwrap();
        for (a, b) in a.iter().zip(&b) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn prediction_is_row_order_invariant() {
        let (train, tg) = separable(60, 13);
        let set = TrainingSet::new(&train, &tg, true).unwrap();
        let m = train_mlp(&set, &[1.0; 60], &MlpConfig { epochs: 2, ..MlpConfig::default() }).unwrap();
        let p = m.predict(&train, &tg).unwrap();
        let rev: Vec<usize> = (0..60).rev().collect();
        let q = m.predict(&train.select(&rev), &tg.select(&rev)).unwrap();
        for (i, &r) in rev.iter().enumerate() {
            assert_eq!(q[i], p[r]);
        }
    }

    #[test]
    fn json_round_trip() {
        let (train, tg) = separable(60, 14);
        let set = TrainingSet::new(&train, &tg, true).unwrap();
        let m = train_mlp(&set, &[1.0; 60], &MlpConfig { epochs: 1, ..MlpConfig::default() }).unwrap();
        let back = FairPredictor::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(&train, &tg).unwrap(), m.predict(&train, &tg).unwrap());
        assert!(FairPredictor::from_json(&m.to_json().unwrap().replace("\"version\":1", "\"version\":99")).is_err());
    }

    #[test]
    fn algorithm_names_parse() {
        for k in AlgorithmKind::FAIRNESS {
            assert_eq!(k.name().parse::<AlgorithmKind>().unwrap(), k);
        }
        assert!("GRY".parse::<AlgorithmKind>().is_ok());
        assert!("svm".parse::<AlgorithmKind>().is_err());
    }
}
