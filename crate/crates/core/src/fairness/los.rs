use super::{Hyper, Params};
use crate::error::Result;
use crate::models::{fit_network, sigmoid, AlgorithmKind, BatchLoss, FairPredictor, Model, TrainingMeta, TrainingSet, WeightedBce};

/// Smoothing added inside each logarithm of the ratio penalty.
pub const LOS_EPSILON: f64 = 1e-6;

/// Mean cross-entropy plus `lambda * (log(max TPR + e) - log(min TPR + e))`
/// over the batch TPRs of groups with at least one positive in the batch.
pub struct LosLoss<'a> {
    pub labels: &'a [u8],
    pub weights: &'a [f64],
    pub group_of_row: &'a [usize],
    pub n_groups: usize,
    pub lambda: f64,
}

impl LosLoss<'_> {
    /// Penalty value and, per batch position, its derivative in the logit.
    pub fn penalty(&self, rows: &[usize], logits: &[f64]) -> (f64, Vec<f64>) {
        let mut sum = vec![0.0; self.n_groups];
        let mut count = vec![0usize; self.n_groups];
        for (&r, &z) in rows.iter().zip(logits) {
            if self.labels[r] == 1 {
                let g = self.group_of_row[r];
                sum[g] += sigmoid(z);
                count[g] += 1;
            }
        }
        let mut grad = vec![0.0; rows.len()];
        let present: Vec<usize> = (0..self.n_groups).filter(|&g| count[g] > 0).collect();
        if present.len() < 2 {
            return (0.0, grad);
        }
        let tpr = |g: usize| sum[g] / count[g] as f64;
        let mut hi = present[0];
        let mut lo = present[0];
        for &g in &present[1..] {
            if tpr(g) > tpr(hi) {
                hi = g;
            }
            if tpr(g) < tpr(lo) {
                lo = g;
            }
        }
        if hi == lo || tpr(hi) == tpr(lo) {
            return (0.0, grad);
        }
        let value = (tpr(hi) + LOS_EPSILON).ln() - (tpr(lo) + LOS_EPSILON).ln();
        let d_hi = 1.0 / ((tpr(hi) + LOS_EPSILON) * count[hi] as f64);
        let d_lo = -1.0 / ((tpr(lo) + LOS_EPSILON) * count[lo] as f64);
        for ((&r, &z), d) in rows.iter().zip(logits).zip(grad.iter_mut()) {
            if self.labels[r] == 1 {
                let g = self.group_of_row[r];
                let s = sigmoid(z);
                if g == hi {
                    *d = d_hi * s * (1.0 - s);
                } else if g == lo {
                    *d = d_lo * s * (1.0 - s);
                }
            }
        }
        (value, grad)
    }
}

impl BatchLoss for LosLoss<'_> {
    fn evaluate(&self, rows: &[usize], logits: &[f64], dlogits: &mut [f64]) -> f64 {
        let bce = WeightedBce {
            labels: self.labels,
            weights: self.weights,
        }
        .evaluate(rows, logits, dlogits);
        if self.lambda == 0.0 {
            return bce;
        }
        let (value, grad) = self.penalty(rows, logits);
        for (d, g) in dlogits.iter_mut().zip(grad) {
            *d += self.lambda * g;
        }
        bce + self.lambda * value
    }
}

pub fn train_los(set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<FairPredictor> {
    let params = Params::new(AlgorithmKind::Los, hyper);
    let lambda = params.non_negative("lambda")?;
    let cfg = params.mlp(seed)?;
    set.require_both_classes()?;
    let weights = vec![1.0; set.len()];
    let groups: Vec<usize> = (0..set.len()).map(|i| set.group_of(i)).collect();
    let objective = LosLoss {
        labels: set.labels(),
        weights: &weights,
        group_of_row: &groups,
        n_groups: set.n_groups(),
        lambda,
    };
    let (net, adam) = fit_network(set, &objective, &cfg)?;
    Ok(FairPredictor::new(
        AlgorithmKind::Los,
        params.resolved(),
        TrainingMeta {
            seed,
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
