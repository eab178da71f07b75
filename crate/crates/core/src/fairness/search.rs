use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_algorithm, AlgorithmSpec, Hyper};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::groups::GroupLabels;
use crate::metrics::{max_tpr_difference, soft_accuracy, soft_tpr_by_group};
use crate::models::FairPredictor;

/// Selection criterion: `sqrt(soft_accuracy * (1 - max_tpr_difference))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningObjective {
    pub value: f64,
    pub soft_accuracy: f64,
    pub max_tpr_difference: f64,
}

impl TuningObjective {
    pub fn new(soft_accuracy: f64, max_tpr_difference: f64) -> Self {
        Self {
            value: tuning_objective(soft_accuracy, max_tpr_difference),
            soft_accuracy,
            max_tpr_difference,
        }
    }

    /// Objective of `probs`. With fewer than two groups having positives the
    /// difference counts as zero.
    pub fn measure(labels: &[u8], probs: &[f64], groups: &GroupLabels) -> Result<Self> {
        let acc = soft_accuracy(labels, probs)?;
        let tprs = soft_tpr_by_group(labels, probs, groups)?;
        let diff = if tprs.values.len() >= 2 {
            max_tpr_difference(&tprs.values)?.max_difference
        } else {
            0.0
        };
        Ok(Self::new(acc, diff))
    }
}

pub fn tuning_objective(soft_accuracy: f64, max_tpr_difference: f64) -> f64 {
    (soft_accuracy * (1.0 - max_tpr_difference)).max(0.0).sqrt()
}

/// One row of the search table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub hyper: Hyper,
    pub objective: Option<TuningObjective>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: FairPredictor,
    pub best_hyper: Hyper,
    pub best_index: usize,
    pub table: Vec<GridPoint>,
}

/// Index of the largest objective; the earliest wins ties.
pub(crate) fn argmax(table: &[GridPoint]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in table.iter().enumerate() {
        if let Some(o) = &row.objective {
            if best.is_none_or(|(_, b)| o.value > b) {
                best = Some((i, o.value));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Train every grid point on `train` and keep the one scoring highest on
/// `val`. Points train in parallel; the table keeps grid order.
pub fn grid_search(
    spec: &AlgorithmSpec,
    train: &crate::models::TrainingSet<'_>,
    val: &Dataset,
    val_groups: &GroupLabels,
    seed: u64,
) -> Result<GridResult> {
    spec.validate()?;
    let points = spec.grid_points();
    let outcomes: Vec<(Hyper, Result<(FairPredictor, TuningObjective)>)> = points
        .into_par_iter()
        .map(|hyper| {
            let out = train_algorithm(spec.kind, train, &hyper, seed).and_then(|model| {
                let probs = model.predict(val, val_groups)?;
                let objective = TuningObjective::measure(val.labels(), &probs, val_groups)?;
                Ok((model, objective))
            });
            (hyper, out)
        })
        .collect();

    let mut table = Vec::with_capacity(outcomes.len());
    let mut models = Vec::with_capacity(outcomes.len());
    for (hyper, out) in outcomes {
        match out {
            Ok((model, objective)) => {
                table.push(GridPoint {
                    hyper,
                    objective: Some(objective),
                    error: None,
                });
                models.push(Some(model));
            }
            Err(e) => {
                table.push(GridPoint {
                    hyper,
                    objective: None,
                    error: Some(e.to_string()),
                });
                models.push(None);
            }
        }
    }
    let Some(best_index) = argmax(&table) else {
        return Err(Error::GridFailed(
            table
                .iter()
                .map(|r| format!("{:?}: {}", r.hyper, r.error.as_deref().unwrap_or("no objective")))
                .collect(),
        ));
    };
    Ok(GridResult {
        best: models.swap_remove(best_index).expect("best point trained"),
        best_hyper: table[best_index].hyper.clone(),
        best_index,
        table,
    })
}
