use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    group_rank_summary, kendall_tau, max_tpr_difference, roc_auc, soft_accuracy, soft_tpr_by_group, KendallTau,
    RankSummary, TprDifference,
};
use crate::error::Result;
use crate::groups::GroupLabels;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub count: usize,
    pub positives: usize,
    pub base_rate: f64,
    pub soft_tpr: Option<f64>,
    pub auc: Option<f64>,
}

/// Everything measured on one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub soft_accuracy: f64,
    pub auc: Option<f64>,
    pub groups: Vec<GroupMetrics>,
    /// Absent with fewer than two groups having positives.
    pub tpr_difference: Option<TprDifference>,
    pub rank_summary: Option<RankSummary>,
    /// Correlation between the base-rate and TPR orderings of the groups.
    pub kendall: Option<KendallTau>,
    /// Why any optional quantity is absent.
    pub notes: Vec<String>,
}

impl EvaluationReport {
    pub fn max_tpr_difference(&self) -> Option<f64> {
        self.tpr_difference.as_ref().map(|d| d.max_difference)
    }

    pub fn group(&self, id: &str) -> Option<&GroupMetrics> {
        self.groups.iter().find(|g| g.group == id)
    }

    pub fn soft_tprs(&self) -> BTreeMap<String, f64> {
        self.groups
            .iter()
            .filter_map(|g| g.soft_tpr.map(|t| (g.group.clone(), t)))
            .collect()
    }

    /// One row per group: `group,count,positives,base_rate,soft_tpr,auc,tpr_rank`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "count", "positives", "base_rate", "soft_tpr", "auc", "tpr_rank"])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for g in &self.groups {
            let rank = self.rank_summary.as_ref().and_then(|r| r.ranks.get(&g.group).copied());
            w.write_record([
                g.group.clone(),
                g.count.to_string(),
                g.positives.to_string(),
                g.base_rate.to_string(),
                opt(g.soft_tpr),
                opt(g.auc),
                opt(rank),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-group and overall metrics of `probs` against `labels`.
pub fn evaluate(labels: &[u8], probs: &[f64], groups: &GroupLabels) -> Result<EvaluationReport> {
    let accuracy = soft_accuracy(labels, probs)?;
    let tprs = soft_tpr_by_group(labels, probs, groups)?;
    let mut notes = Vec::new();
    let auc = match roc_auc(labels, probs) {
        Ok(a) => Some(a),
        Err(e) => {
            notes.push(format!("overall auc: {e}"));
            None
        }
    };
    let mut per_group = Vec::with_capacity(groups.n_groups());
    for (g, id) in groups.ids().iter().enumerate() {
        let rows = groups.members(g);
        if rows.is_empty() {
            continue;
        }
        let y: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
        let p: Vec<f64> = rows.iter().map(|&i| probs[i]).collect();
        let positives = y.iter().filter(|&&v| v == 1).count();
        per_group.push(GroupMetrics {
            group: id.clone(),
            count: rows.len(),
            positives,
            base_rate: positives as f64 / rows.len() as f64,
            soft_tpr: tprs.values.get(id).copied(),
            auc: roc_auc(&y, &p).ok(),
        });
    }
    for id in &tprs.omitted {
        if per_group.iter().any(|g| &g.group == id) {
            notes.push(format!("group {id} has no positives; TPR omitted"));
        }
    }

    let (tpr_difference, rank_summary, kendall) = if tprs.values.len() >= 2 {
        let rates: BTreeMap<String, f64> = per_group
            .iter()
            .filter(|g| g.soft_tpr.is_some())
            .map(|g| (g.group.clone(), g.base_rate))
            .collect();
        let diff = max_tpr_difference(&tprs.values)?;
        let ranks = group_rank_summary(&tprs.values, &rates)?;
        let a: Vec<f64> = rates.values().copied().collect();
        let b: Vec<f64> = tprs.values.values().copied().collect();
        let tau = match kendall_tau(&a, &b) {
            Ok(t) => Some(t),
            Err(e) => {
                notes.push(format!("kendall tau: {e}"));
                None
            }
        };
        (Some(diff), Some(ranks), tau)
    } else {
        notes.push("fewer than 2 groups with positives; no TPR comparison".into());
        (None, None, None)
    };

    Ok(EvaluationReport {
        n: labels.len(),
        soft_accuracy: accuracy,
        auc,
        groups: per_group,
        tpr_difference,
        rank_summary,
        kendall,
        notes,
    })
}
