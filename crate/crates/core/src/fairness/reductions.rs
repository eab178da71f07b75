use super::{train_tprs, Hyper, Params};
use crate::error::Result;
use crate::models::{fit_network, AlgorithmKind, FairPredictor, Model, TrainingMeta, TrainingSet, WeightedBce};
use crate::seed;

/// Exponentiated-gradient reduction over signed TPR-parity constraints,
/// `TPR_g - TPR_all <= eps` and `TPR_all - TPR_g <= eps` for every group.
///
/// Each round turns the current multipliers into per-row costs of predicting
/// a positive, fits a network to the cheaper label with weight proportional
/// to the cost gap, and moves the multipliers toward the constraints that
/// network violates. The returned predictor averages every round's
/// probabilities.
pub fn train_rdc(set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<FairPredictor> {
    let params = Params::new(AlgorithmKind::Rdc, hyper);
    let rounds = params.count("iterations")?;
    let eps = params.non_negative("eps")?;
    let eta0 = params.positive("eta0")?;
    let bound = params.non_negative("bound")?;
    let base = params.mlp(seed)?;
    set.require_positives_per_group()?;

    let n = set.len() as f64;
    let k = set.n_groups();
    let pos = set.positives_per_group();
    let total_pos: usize = pos.iter().sum();
    let mut theta = vec![0.0f64; 2 * k];
    let mut members = Vec::with_capacity(rounds);
    let mut relabel = vec![0u8; set.len()];
    let mut weights = vec![0.0; set.len()];

    for t in 0..rounds {
        let exps: Vec<f64> = theta.iter().map(|v| v.exp()).collect();
        let denom = 1.0 + exps.iter().sum::<f64>();
        let mu: Vec<f64> = (0..k).map(|g| bound * (exps[2 * g] - exps[2 * g + 1]) / denom).collect();
        let mu_total: f64 = mu.iter().sum();

        for (i, &y) in set.labels().iter().enumerate() {
            let g = set.group_of(i);
            let mut delta = (1.0 - 2.0 * y as f64) / n;
            if y == 1 {
                delta += mu[g] / pos[g] as f64 - mu_total / total_pos as f64;
            }
            relabel[i] = (delta < 0.0) as u8;
            weights[i] = n * delta.abs();
        }
        let cfg = crate::models::MlpConfig {
            seed: seed::derive_seed(seed, t as u64),
            ..base.clone()
        };
        let objective = WeightedBce {
            labels: &relabel,
            weights: &weights,
        };
        let (net, _) = fit_network(set, &objective, &cfg)?;
        let probs: Vec<f64> = (0..set.len()).map(|i| net.predict_proba(set.x.row(i))).collect();
        members.push(net);

        let (tprs, overall) = train_tprs(set, &probs);
        let step = eta0 / ((t + 1) as f64).sqrt();
        for (g, tpr) in tprs.iter().enumerate() {
            let gap = tpr.unwrap_or(overall) - overall;
            theta[2 * g] += step * (gap - eps);
            theta[2 * g + 1] += step * (-gap - eps);
        }
    }

    Ok(FairPredictor::new(
        AlgorithmKind::Rdc,
        params.resolved(),
        TrainingMeta {
            seed,
            epochs_run: base.epochs * rounds,
            iterations: rounds,
        },
        set.encoder.clone(),
        Model::Ensemble { members },
    ))
}
