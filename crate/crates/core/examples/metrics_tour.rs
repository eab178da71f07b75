//! The evaluation metrics on a hand-made set of predictions.
//!
//! cargo run --example metrics_tour

use intersectional::groups::GroupLabels;
use intersectional::metrics::{
    confidence_interval, evaluate, fisher_combine, group_rank_summary, kendall_tau, max_tpr_difference, roc_auc,
    soft_accuracy, soft_tpr_by_group,
};

fn main() -> intersectional::Result<()> {
    let labels = [1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0, 0];
    let probs = [0.9, 0.7, 0.4, 0.6, 0.2, 0.5, 0.8, 0.3, 0.1, 0.55, 0.35, 0.6];
    let groups = GroupLabels::from_row_ids(&["A", "A", "A", "A", "B", "B", "B", "B", "C", "C", "C", "C"]);

    println!("soft accuracy {:.3}", soft_accuracy(&labels, &probs)?);
    println!("AUC           {:.3}", roc_auc(&labels, &probs)?);

    let tprs = soft_tpr_by_group(&labels, &probs, &groups)?;
    for (g, t) in &tprs.values {
        println!("soft TPR {g}    {t:.3}");
    }
    let diff = max_tpr_difference(&tprs.values)?;
    println!("max TPR difference {:.3}", diff.max_difference);
    for (g, row) in diff.groups.iter().zip(&diff.pairwise) {
        println!("  {g}: {row:+.3?}");
    }

    // Two TPR sets with the same extremes hide different middles.
    let a = [("x", 0.1), ("y", 0.2), ("z", 0.8)].map(|(k, v)| (k.to_string(), v)).into();
    let b = [("x", 0.1), ("y", 0.6), ("z", 0.8)].map(|(k, v)| (k.to_string(), v)).into();
    println!(
        "obscured middles: {} vs {}",
        max_tpr_difference(&a)?.max_difference,
        max_tpr_difference(&b)?.max_difference
    );

    let report = evaluate(&labels, &probs, &groups)?;
    let rates = report.groups.iter().map(|g| (g.group.clone(), g.base_rate)).collect();
    let ranks = group_rank_summary(&tprs.values, &rates)?;
    println!(
        "lowest base rate {} ranks {}, highest {} ranks {}",
        ranks.group_a, ranks.rank_a, ranks.group_b, ranks.rank_b
    );

    let base = [0.2, 0.35, 0.5, 0.6, 0.75];
    let tpr = [0.3, 0.4, 0.45, 0.7, 0.65];
    let k = kendall_tau(&base, &tpr)?;
    println!("Kendall tau {:.2}, p {:.3}", k.tau, k.p_value);

    let (stat, p) = fisher_combine(&[0.04, 0.10, 0.03, 0.20, 0.08])?;
    println!("Fisher statistic {stat:.2}, combined p {p:.4}");

    let ci = confidence_interval(&[0.70, 0.72, 0.68, 0.75, 0.65])?;
    println!("mean {:.3} ± {:.3}", ci.mean, ci.half_width);
    Ok(())
}
