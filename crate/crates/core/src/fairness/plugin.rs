use super::{Hyper, Params};
use crate::error::Result;
use crate::models::{
    sigmoid, train_logistic, Adam, AlgorithmKind, FairPredictor, LogisticConfig, Model, TrainingMeta, TrainingSet,
};

/// Squared excess of each group's TPR gap over the slack, summed, and its
/// gradient in the offsets. Only positives enter.
fn penalty(
    logits: &[f64],
    groups: &[usize],
    offsets: &[f64],
    pos: &[usize],
    nu: f64,
) -> (f64, Vec<f64>) {
    let k = offsets.len();
    let total = logits.len() as f64;
    let mut sum = vec![0.0; k];
    let mut slope = vec![0.0; k];
    for (&z, &g) in logits.iter().zip(groups) {
        let s = sigmoid(z + offsets[g]);
        sum[g] += s;
        slope[g] += s * (1.0 - s);
    }
    let overall = sum.iter().sum::<f64>() / total;
    // d overall / d offset_h = slope_h / P
    let d_overall: Vec<f64> = slope.iter().map(|s| s / total).collect();
    let mut value = 0.0;
    let mut grad = vec![0.0; k];
    for g in (0..k).filter(|&g| pos[g] > 0) {
        let gap = sum[g] / pos[g] as f64 - overall;
        let excess = gap.abs() - nu;
        if excess <= 0.0 {
            continue;
        }
        value += excess * excess;
        let coef = 2.0 * excess * gap.signum();
        grad[g] += coef * slope[g] / pos[g] as f64;
        for (h, d) in d_overall.iter().enumerate() {
            grad[h] -= coef * d;
        }
    }
    (value, grad)
}

/// Plugin correction: a logistic base model plus one additive logit offset
/// per group, moved by projected Adam steps until every group's soft TPR is
/// within `nu` of the overall rate (or the step budget runs out).
pub fn train_grp(set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<FairPredictor> {
    let params = Params::new(AlgorithmKind::Grp, hyper);
    let nu = params.non_negative("nu")?;
    let bound = params.non_negative("bound")?;
    let steps = params.count("epochs")?;
    let lr = params.positive("learning_rate")?;
    let base_cfg = LogisticConfig {
        learning_rate: params.positive("base_learning_rate")?,
        epochs: params.count("base_epochs")?,
        batch_size: params.count("base_batch_size")?,
        seed,
    };
    let base = train_logistic(set, &vec![1.0; set.len()], &base_cfg)?;
    let net = base.network().expect("logistic model is a network").clone();

    let mut logits = Vec::new();
    let mut groups = Vec::new();
    for (i, &y) in set.labels().iter().enumerate() {
        if y == 1 {
            logits.push(net.logit(set.x.row(i)));
            groups.push(set.group_of(i));
        }
    }
    let pos = set.positives_per_group();
    let mut offsets = vec![0.0; set.n_groups()];
    let mut adam = Adam::new(offsets.len());
    let mut taken = 0;
    while taken < steps {
        let (value, grad) = penalty(&logits, &groups, &offsets, &pos, nu);
        if value == 0.0 {
            break;
        }
        adam.step(&mut offsets, &grad, lr);
        for o in &mut offsets {
            *o = o.clamp(-bound, bound);
        }
        taken += 1;
    }

    Ok(FairPredictor::new(
        AlgorithmKind::Grp,
        params.resolved(),
        TrainingMeta {
            seed,
            epochs_run: base_cfg.epochs,
            iterations: taken,
        },
        set.encoder.clone(),
        Model::Corrected { base: net, offsets },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 2.0, 0.1, -0.4, 1.1];
        let groups = [0, 0, 1, 1, 2, 2];
        let pos = [2, 2, 2];
        let offsets = [0.2, -0.1, 0.4];
        let (_, grad) = penalty(&logits, &groups, &offsets, &pos, 0.01);
        for h in 0..3 {
            let mut up = offsets;
            let mut down = offsets;
            up[h] += 1e-6;
            down[h] -= 1e-6;
            let fd = (penalty(&logits, &groups, &up, &pos, 0.01).0 - penalty(&logits, &groups, &down, &pos, 0.01).0)
                / 2e-6;
            assert!((fd - grad[h]).abs() < 1e-7, "{h}: {fd} vs {}", grad[h]);
        }
    }

    #[test]
    fn within_slack_has_no_penalty() {
        let (v, g) = penalty(&[0.0, 0.0], &[0, 1], &[0.0, 0.0], &[1, 1], 0.0);
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }
}
