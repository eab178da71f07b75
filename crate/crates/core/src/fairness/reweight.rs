use std::collections::BTreeMap;

use super::{train_tprs, Hyper, Params};
use crate::error::Result;
use crate::models::{continue_training, train_mlp, AlgorithmKind, FairPredictor, TrainingSet};

/// A reweighted model and the final positive-example weight of each group.
#[derive(Debug, Clone)]
pub struct RwtOutcome {
    pub predictor: FairPredictor,
    pub positive_weights: BTreeMap<String, f64>,
}

pub fn train_rwt(set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<FairPredictor> {
    train_rwt_detailed(set, hyper, seed).map(|o| o.predictor)
}

/// Alternates weight updates with resumed training. The `epochs` budget is
/// shared between the initial fit and the `iterations` continuation rounds;
/// the initial fit takes any remainder.
pub fn train_rwt_detailed(set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<RwtOutcome> {
    let params = Params::new(AlgorithmKind::Rwt, hyper);
    let eta = params.non_negative("eta")?;
    let rounds = params.count("iterations")?;
    let mut cfg = params.mlp(seed)?;
    set.require_positives_per_group()?;

    let per_round = cfg.epochs / (rounds + 1);
    cfg.epochs -= per_round * rounds;
    let mut group_w = vec![1.0; set.n_groups()];
    let mut weights = vec![1.0; set.len()];
    let mut model = train_mlp(set, &weights, &cfg)?;

    for _ in 0..rounds {
        let (tprs, overall) = train_tprs(set, &set.predict(&model));
        for (w, tpr) in group_w.iter_mut().zip(&tprs) {
            if let Some(t) = tpr {
                *w *= (-eta * (t - overall)).exp();
            }
        }
        for (i, (w, &y)) in weights.iter_mut().zip(set.labels()).enumerate() {
            if y == 1 {
                *w = group_w[set.group_of(i)];
            }
        }
        model = continue_training(&model, set, &weights, per_round)?;
    }

    model.algorithm = AlgorithmKind::Rwt;
    model.hyper = params.resolved();
    model.meta.iterations = rounds;
    Ok(RwtOutcome {
        positive_weights: set.groups.ids().iter().cloned().zip(group_w).collect(),
        predictor: model,
    })
}
