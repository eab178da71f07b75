use super::{train_tprs, Hyper, Params};
use crate::error::Result;
use crate::models::{AlgorithmKind, FairPredictor, LinearModel, Model, TrainingMeta, TrainingSet, RIDGE};

/// Learner/auditor fictitious play.
///
/// Each round the learner fits a linear regression to cost-adjusted targets
/// against the auditor's average play, thresholded at 0.5. The auditor then
/// inspects the running average of the learner's hard outputs and, if some
/// group's soft TPR is more than `gamma` from the overall rate, plays `c` on
/// the worst group (signed so as to pull it back), otherwise nothing. The
/// predictor averages all rounds' hard outputs.
///
/// The learner's target for row `i` of group `g` is
/// `y_i - (n / 2) * y_i * (lambda_g / P_g - sum(lambda) / P)`, which is 1
/// exactly when predicting a positive is the cheaper choice.
pub fn train_gry(set: &TrainingSet<'_>, hyper: &Hyper, seed: u64) -> Result<FairPredictor> {
    let params = Params::new(AlgorithmKind::Gry, hyper);
    let cap = params.non_negative("c")?;
    let gamma = params.non_negative("gamma")?;
    let rounds = params.count("iterations")?;
    set.require_positives_per_group()?;

    let n = set.len();
    let k = set.n_groups();
    let pos = set.positives_per_group();
    let total_pos: usize = pos.iter().sum();
    let mut play_sum = vec![0.0; k];
    let mut vote_sum = vec![0.0; n];
    let mut members = Vec::with_capacity(rounds);
    let mut targets = vec![0.0; n];

    for t in 0..rounds {
        let lambda: Vec<f64> = play_sum.iter().map(|s| s / t.max(1) as f64).collect();
        let lambda_total: f64 = lambda.iter().sum();
        for (i, &y) in set.labels().iter().enumerate() {
            let g = set.group_of(i);
            targets[i] = y as f64;
            if y == 1 {
                targets[i] -= 0.5 * n as f64 * (lambda[g] / pos[g] as f64 - lambda_total / total_pos as f64);
            }
        }
        let learner = LinearModel::fit(&set.x, &targets, RIDGE)?;
        for (i, v) in vote_sum.iter_mut().enumerate() {
            *v += learner.hard(set.x.row(i));
        }
        members.push(learner);

        let mixture: Vec<f64> = vote_sum.iter().map(|v| v / (t + 1) as f64).collect();
        let (tprs, overall) = train_tprs(set, &mixture);
        let worst = tprs
            .iter()
            .enumerate()
            .filter_map(|(g, t)| t.map(|t| (g, t - overall)))
            .fold(None, |best: Option<(usize, f64)>, (g, gap)| match best {
                Some((_, b)) if b.abs() >= gap.abs() => best,
                _ => Some((g, gap)),
            });
        if let Some((g, gap)) = worst {
            if gap.abs() > gamma {
                play_sum[g] += cap * gap.signum();
            }
        }
    }

    Ok(FairPredictor::new(
        AlgorithmKind::Gry,
        params.resolved(),
        TrainingMeta {
            seed,
            epochs_run: 0,
            iterations: rounds,
        },
        set.encoder.clone(),
        Model::HardVote { members },
    ))
}
