//! Evaluation quantities. Every TPR here is the soft (probabilistic) one:
//! the mean predicted probability over a group's positive examples.

mod rank;
mod report;

pub use rank::{kendall_tau, kendall_tau_b, ranks_descending, KendallTau, EXACT_PERMUTATION_MAX};
pub use report::{evaluate, EvaluationReport, GroupMetrics};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::groups::GroupLabels;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

fn check_pairs(labels: &[u8], probs: &[f64]) -> Result<()> {
    if labels.len() != probs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} predictions",
            labels.len(),
            probs.len()
        )));
    }
    Ok(())
}

/// `(1/n) sum y p + (1 - y)(1 - p)`.
pub fn soft_accuracy(labels: &[u8], probs: &[f64]) -> Result<f64> {
    check_pairs(labels, probs)?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("soft accuracy of no rows".into()));
    }
    let total: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| if y == 1 { p } else { 1.0 - p })
        .sum();
    Ok(total / labels.len() as f64)
}

/// Per-group soft TPRs. Groups without a positive example have no TPR and are
/// listed in `omitted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTprs {
    pub values: BTreeMap<String, f64>,
    pub omitted: Vec<String>,
}

pub fn soft_tpr_by_group(labels: &[u8], probs: &[f64], groups: &GroupLabels) -> Result<SoftTprs> {
    check_pairs(labels, probs)?;
    if groups.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} group labels for {} rows",
            groups.len(),
            labels.len()
        )));
    }
    let k = groups.n_groups();
    let mut sum = vec![0.0; k];
    let mut pos = vec![0usize; k];
    for (i, (&y, &p)) in labels.iter().zip(probs).enumerate() {
        if y == 1 {
            let g = groups.index_of_row(i);
            sum[g] += p;
            pos[g] += 1;
        }
    }
    let mut values = BTreeMap::new();
    let mut omitted = Vec::new();
    for (g, id) in groups.ids().iter().enumerate() {
        if pos[g] > 0 {
            values.insert(id.clone(), sum[g] / pos[g] as f64);
        } else {
            omitted.push(id.clone());
        }
    }
    Ok(SoftTprs { values, omitted })
}

/// Largest TPR gap plus the signed matrix `pairwise[i][j] = tpr_i - tpr_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TprDifference {
    pub max_difference: f64,
    pub groups: Vec<String>,
    pub pairwise: Vec<Vec<f64>>,
}

impl TprDifference {
    /// Largest gap among a subset of the groups.
    pub fn among(&self, subset: &[String]) -> Result<f64> {
        let idx: Vec<usize> = subset
            .iter()
            .map(|id| {
                self.groups
                    .iter()
                    .position(|g| g == id)
                    .ok_or_else(|| Error::UnknownGroup(id.clone()))
            })
            .collect::<Result<_>>()?;
        if idx.len() < 2 {
            return Err(Error::InvalidArgument("need at least 2 groups".into()));
        }
        Ok(idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.pairwise[i][j])
            .fold(0.0, f64::max))
    }
}

pub fn max_tpr_difference(tprs: &BTreeMap<String, f64>) -> Result<TprDifference> {
    if tprs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "max TPR difference needs at least 2 groups, got {}",
            tprs.len()
        )));
    }
    let groups: Vec<String> = tprs.keys().cloned().collect();
    let vals: Vec<f64> = tprs.values().copied().collect();
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let pairwise = vals
        .iter()
        .map(|a| vals.iter().map(|b| a - b).collect())
        .collect();
    Ok(TprDifference {
        max_difference: hi - lo,
        groups,
        pairwise,
    })
}

/// Probability that a random positive scores above a random negative, ties
/// counting one half. Computed from average ranks.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_pairs(labels, scores)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined(format!(
            "AUC needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    let ranks = ranks_descending(scores);
    let n = labels.len() as f64;
    // Ascending rank is n + 1 - descending rank.
    let rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&y, _)| y == 1)
        .map(|(_, r)| n + 1.0 - r)
        .sum();
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// TPR ranks (1 = highest) plus the ranks of the lowest- and highest-base-rate
/// groups, called A and B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub ranks: BTreeMap<String, f64>,
    pub group_a: String,
    pub rank_a: f64,
    pub group_b: String,
    pub rank_b: f64,
}

pub fn group_rank_summary(
    tprs: &BTreeMap<String, f64>,
    base_rates: &BTreeMap<String, f64>,
) -> Result<RankSummary> {
    if tprs.len() < 2 {
        return Err(Error::InvalidArgument("rank summary needs at least 2 groups".into()));
    }
    if tprs.len() != base_rates.len() || tprs.keys().any(|k| !base_rates.contains_key(k)) {
        return Err(Error::InvalidArgument("TPR and base-rate groups differ".into()));
    }
    let ids: Vec<&String> = tprs.keys().collect();
    let ranks_vec = ranks_descending(&tprs.values().copied().collect::<Vec<_>>());
    let ranks: BTreeMap<String, f64> = ids.iter().map(|s| (*s).clone()).zip(ranks_vec).collect();
    let mut a = ids[0];
    let mut b = ids[0];
    for id in &ids[1..] {
        if base_rates[*id] < base_rates[a] {
            a = id;
        }
        if base_rates[*id] > base_rates[b] {
            b = id;
        }
    }
    Ok(RankSummary {
        rank_a: ranks[a],
        rank_b: ranks[b],
        group_a: a.clone(),
        group_b: b.clone(),
        ranks,
    })
}

/// Fisher's method: `-2 sum ln p` against chi-square with `2k` degrees of
/// freedom. Returns `(statistic, combined p)`.
pub fn fisher_combine(p_values: &[f64]) -> Result<(f64, f64)> {
    if p_values.is_empty() {
        return Err(Error::InvalidArgument("no p-values to combine".into()));
    }
    if let Some(p) = p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside (0, 1]")));
    }
    let stat: f64 = -2.0 * p_values.iter().map(|p| p.ln()).sum::<f64>();
    let p = if stat <= 0.0 {
        1.0
    } else {
        gamma_ur(p_values.len() as f64, stat / 2.0)
    };
    Ok((stat, p.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub half_width: f64,
    pub n_trials: usize,
}

impl ConfidenceInterval {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn overlaps(&self, other: &ConfidenceInterval) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

/// `mean +- 1.96 s / sqrt(n)` with the `n - 1` sample deviation.
pub fn confidence_interval(values: &[f64]) -> Result<ConfidenceInterval> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "confidence interval needs at least 2 values, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(ConfidenceInterval {
        mean,
        half_width: Z_95 * var.sqrt() / (n as f64).sqrt(),
        n_trials: n,
    })
}

/// Mean of a metric across trials when a full interval is unavailable.
pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn soft_accuracy_pins() {
        assert_eq!(soft_accuracy(&[1, 0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(soft_accuracy(&[1, 0], &[0.8, 0.3]).unwrap(), 0.75);
        assert_eq!(soft_accuracy(&[1, 1, 0], &[0.5; 3]).unwrap(), 0.5);
        assert!(soft_accuracy(&[], &[]).is_err());
        assert!(soft_accuracy(&[1], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn soft_tpr_pins() {
        let g = GroupLabels::from_row_ids(&["a", "a", "b", "b", "c"]);
        let t = soft_tpr_by_group(&[1, 1, 0, 0, 1], &[0.6, 0.8, 0.3, 0.1, 0.4], &g).unwrap();
        assert!((t.values["a"] - 0.7).abs() < 1e-15);
        assert!(!t.values.contains_key("b"));
        assert_eq!(t.omitted, vec!["b".to_string()]);
        assert_eq!(t.values["c"], 0.4);
    }

    #[test]
    fn soft_tpr_is_not_thresholded() {
        let g = GroupLabels::from_row_ids(&["a", "a"]);
        let t = soft_tpr_by_group(&[1, 1], &[0.4, 0.4], &g).unwrap();
        assert_eq!(t.values["a"], 0.4);
    }

    #[test]
    fn max_difference_pins() {
        let a = max_tpr_difference(&map(&[("x", 0.1), ("y", 0.2), ("z", 0.8)])).unwrap();
        let b = max_tpr_difference(&map(&[("x", 0.1), ("y", 0.6), ("z", 0.8)])).unwrap();
        assert_eq!(a.max_difference, b.max_difference);
        assert!((a.max_difference - 0.7).abs() <= 2.0 * f64::EPSILON);
        assert!(a.pairwise[1][0] > 0.0 && a.pairwise[0][1] < 0.0);
        assert_eq!(
            max_tpr_difference(&map(&[("x", 0.4), ("y", 0.4)])).unwrap().max_difference,
            0.0
        );
        assert!(max_tpr_difference(&map(&[("x", 0.4)])).is_err());
        let sub = a.among(&["x".into(), "y".into()]).unwrap();
        assert!((sub - 0.1).abs() < 1e-15);
        assert!(a.among(&["x".into(), "q".into()]).is_err());
    }

    #[test]
    fn auc_pins() {
        assert_eq!(roc_auc(&[1, 0], &[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[1, 0, 1, 0], &[0.8, 0.8, 0.6, 0.4]).unwrap(), 0.625);
        assert_eq!(roc_auc(&[1, 0], &[0.1, 0.9]).unwrap(), 0.0);
        assert!(matches!(roc_auc(&[1, 1], &[0.1, 0.9]), Err(Error::Undefined(_))));
    }

    #[test]
    fn rank_summary_pins() {
        let tprs = map(&[("A", 0.2), ("B", 0.9), ("C", 0.5), ("D", 0.6)]);
        let rates = map(&[("A", 0.1), ("B", 0.7), ("C", 0.3), ("D", 0.4)]);
        let s = group_rank_summary(&tprs, &rates).unwrap();
        assert_eq!((s.group_a.as_str(), s.rank_a), ("A", 4.0));
        assert_eq!((s.group_b.as_str(), s.rank_b), ("B", 1.0));
        let flat = map(&[("A", 0.5), ("B", 0.5), ("C", 0.5), ("D", 0.5)]);
        let s = group_rank_summary(&flat, &rates).unwrap();
        assert!(s.ranks.values().all(|&r| r == 2.5));
        assert!(group_rank_summary(&map(&[("A", 0.5)]), &map(&[("A", 0.5)])).is_err());
    }

    #[test]
    fn fisher_pins() {
        assert_eq!(fisher_combine(&[1.0, 1.0]).unwrap(), (0.0, 1.0));
        let (s, p) = fisher_combine(&[0.5, 0.5]).unwrap();
        assert!((s - 2.772588722239781).abs() < 1e-12);
        // df 4: sf(x) = exp(-x/2)(1 + x/2)
        assert!((p - (-s / 2.0).exp() * (1.0 + s / 2.0)).abs() < 1e-12);
        assert!((p - 0.5966).abs() < 1e-3);
        let (_, p) = fisher_combine(&[0.05]).unwrap();
        assert!((p - 0.05).abs() < 1e-12);
        assert!(fisher_combine(&[0.0]).is_err());
        assert!(fisher_combine(&[]).is_err());
        assert!(fisher_combine(&[1.5]).is_err());
    }

    #[test]
    fn interval_pins() {
        let ci = confidence_interval(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(ci.half_width, 0.0);
        let ci = confidence_interval(&[0.0, 1.0]).unwrap();
        assert_eq!(ci.mean, 0.5);
        assert!((ci.half_width - 0.98).abs() < 1e-12);
        let v = [0.12, 0.15, 0.11, 0.18, 0.14];
        // mean .14, squared deviations sum .0030, s^2 = .00075
        let ci = confidence_interval(&v).unwrap();
        assert!((ci.mean - 0.14).abs() < 1e-12);
        assert!((ci.half_width - 1.96 * (0.00075f64 / 5.0).sqrt()).abs() < 1e-9);
        assert!(confidence_interval(&[1.0]).is_err());
    }

    fn labelled(max: usize) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
        (1..max).prop_flat_map(|n| (prop::collection::vec(0u8..2, n), prop::collection::vec(0.0f64..=1.0, n)))
    }

    proptest! {
        #[test]
        fn soft_accuracy_complement((y, p) in labelled(40)) {
            let q: Vec<f64> = p.iter().map(|p| 1.0 - p).collect();
            let s = soft_accuracy(&y, &p).unwrap() + soft_accuracy(&y, &q).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auc_monotone_invariant((y, p) in labelled(40)) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            let t: Vec<f64> = p.iter().map(|p| (3.0 * p).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc(&y, &p).unwrap(), roc_auc(&y, &t).unwrap());
        }

        #[test]
        fn auc_complement((y, p) in labelled(40)) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            let mut sorted = p.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
            let q: Vec<f64> = p.iter().map(|p| 1.0 - p).collect();
            let s = roc_auc(&y, &p).unwrap() + roc_auc(&y, &q).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn max_difference_is_max_abs_pairwise(v in prop::collection::vec(0.0f64..=1.0, 2..10)) {
            let m: BTreeMap<String, f64> = v.iter().enumerate().map(|(i, x)| (format!("g{i}"), *x)).collect();
            let d = max_tpr_difference(&m).unwrap();
            let max_abs = d.pairwise.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
            prop_assert_eq!(d.max_difference, max_abs);
        }

        #[test]
        fn fisher_statistic_additive(
            a in prop::collection::vec(1e-6f64..=1.0, 1..6),
            b in prop::collection::vec(1e-6f64..=1.0, 1..6),
        ) {
            let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
            let s = fisher_combine(&a).unwrap().0 + fisher_combine(&b).unwrap().0;
            prop_assert!((fisher_combine(&joined).unwrap().0 - s).abs() < 1e-9);
        }

        #[test]
        fn interval_mean_is_arithmetic_mean(v in prop::collection::vec(-1.0f64..1.0, 2..10)) {
            let ci = confidence_interval(&v).unwrap();
            prop_assert!((ci.mean - v.iter().sum::<f64>() / v.len() as f64).abs() < 1e-12);
            prop_assert!(ci.half_width >= 0.0);
        }
    }
}
