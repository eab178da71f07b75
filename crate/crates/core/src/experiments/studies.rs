use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::{labels, CellKey, ExperimentSpec, Outcome, Prepared, ProbeParams, StudyKind, TrialData};
use crate::data::{split_indices, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::fairness::{grid_search, train_baseline, AlgorithmSpec, Hyper};
use crate::groups::{apply_other_strategy, redistribute, GroupLabels, OtherStrategy};
use crate::metrics::{evaluate, roc_auc, EvaluationReport};
use crate::models::TrainingSet;
use crate::seed;

pub(super) type Cell = (CellKey, Outcome, f64);

/// Mixture-probe variant trained on the two donors only.
pub const DONORS_ONLY: &str = "donors_only";
/// Mixture-probe variant with target rows swapped into the budget.
pub const TARGET_INCLUDED: &str = "target_included";
const PROBE_ALGORITHM: &str = "baseline";

/// Checks that need the data but no training.
pub(super) fn check(p: &Prepared<'_>) -> Result<()> {
    let spec = p.spec;
    match spec.study {
        StudyKind::Granularity => {
            for (s, scheme) in &p.scenarios {
                if !scheme.is_coarsening_of(&p.finest) {
                    return Err(Error::Validation(format!(
                        "scenario `{}` is not a coarsening of the finest grouping",
                        s.name
                    )));
                }
            }
            for g in &spec.focus_groups {
                if !p.finest.contains(g) {
                    return Err(Error::UnknownGroup(g.clone()));
                }
            }
        }
        StudyKind::OtherHandling => {
            let other = &spec.other.as_ref().expect("validated").other_group;
            for (s, scheme) in &p.scenarios {
                if !scheme.contains(other) {
                    return Err(Error::UnknownGroup(format!("{other} (Other group, scenario `{}`)", s.name)));
                }
            }
        }
        StudyKind::RankingReification => {
            if p.finest.group_ids().len() < 3 {
                return Err(Error::Validation("ranking reification needs at least 3 groups".into()));
            }
        }
        StudyKind::SubgroupPredictivity | StudyKind::MixtureProbe => check_probe(p)?,
    }
    Ok(())
}

fn check_probe(p: &Prepared<'_>) -> Result<()> {
    let probe = p.spec.probe.as_ref().expect("validated");
    for g in std::iter::once(&probe.target).chain(&probe.donors) {
        if !p.finest.contains(g) {
            return Err(Error::UnknownGroup(g.clone()));
        }
    }
    let groups = p.finest.assign(&p.data)?;
    for t in 0..p.spec.n_trials {
        let seed = p.spec.seed.wrapping_add(t as u64);
        let idx = split_indices(p.data.len(), &SplitSpec::with_seed(seed))?;
        let in_train = |id: &str| idx.train.iter().filter(|&&i| groups.id_of_row(i) == id).count();
        let donors: &[String] = if p.spec.study == StudyKind::MixtureProbe {
            &probe.donors[..2]
        } else {
            &probe.donors
        };
        for d in donors {
            let have = in_train(d);
            if have < probe.n {
                return Err(Error::Validation(format!(
                    "donor `{d}` has {have} training rows in trial {t}, the probe needs {}",
                    probe.n
                )));
            }
        }
        if p.spec.study == StudyKind::MixtureProbe {
            let need = probe.counts().into_iter().max().unwrap_or(0);
            let have = in_train(&probe.target);
            if have < need {
                return Err(Error::Validation(format!(
                    "target `{}` has {have} training rows in trial {t}, the largest target count is {need}",
                    probe.target
                )));
            }
        }
        if !idx.test.iter().any(|&i| groups.id_of_row(i) == probe.target) {
            return Err(Error::Validation(format!(
                "target `{}` has no test rows in trial {t}",
                probe.target
            )));
        }
    }
    Ok(())
}

/// Every cell a trial produces, in output order.
pub(super) fn keys(p: &Prepared<'_>) -> Vec<CellKey> {
    let spec = p.spec;
    let mut out = Vec::new();
    match spec.study {
        StudyKind::Granularity | StudyKind::RankingReification => {
            for (s, _) in &p.scenarios {
                for a in &spec.algorithms {
                    out.push(CellKey::new(&s.name, a.kind.name(), ""));
                }
            }
        }
        StudyKind::OtherHandling => {
            let other = spec.other.as_ref().expect("validated");
            for (s, _) in &p.scenarios {
                for a in &spec.algorithms {
                    for st in &other.strategies {
                        out.push(CellKey::new(&s.name, a.kind.name(), st.name()));
                    }
                }
            }
        }
        StudyKind::SubgroupPredictivity => {
            let probe = spec.probe.as_ref().expect("validated");
            for d in &probe.donors {
                out.push(CellKey::new(probe_scenario(p), PROBE_ALGORITHM, d));
            }
        }
        StudyKind::MixtureProbe => {
            let probe = spec.probe.as_ref().expect("validated");
            out.push(CellKey::new(probe_scenario(p), PROBE_ALGORITHM, DONORS_ONLY));
            for m in probe.counts() {
                out.push(CellKey::new(probe_scenario(p), PROBE_ALGORITHM, TARGET_INCLUDED).at(m));
            }
        }
    }
    out
}

fn probe_scenario<'a>(p: &'a Prepared<'_>) -> &'a str {
    &p.scenarios[0].0.name
}

pub(super) fn run(p: &Prepared<'_>, data: &TrialData) -> Vec<Cell> {
    let outcome = match p.spec.study {
        StudyKind::Granularity | StudyKind::RankingReification => grouped(p, data),
        StudyKind::OtherHandling => other_handling(p, data),
        StudyKind::SubgroupPredictivity => subgroup_probe(p, data),
        StudyKind::MixtureProbe => mixture_probe(p, data),
    };
    match outcome {
        Ok(cells) => cells,
        Err(e) => keys(p)
            .into_iter()
            .map(|k| (k, Outcome::Failed { error: e.to_string() }, 0.0))
            .collect(),
    }
}

fn timed(key: CellKey, f: impl FnOnce() -> Result<Outcome>) -> Cell {
    let started = Instant::now();
    let outcome = f().unwrap_or_else(|e| Outcome::Failed { error: e.to_string() });
    (key, outcome, started.elapsed().as_secs_f64())
}

/// Tune `alg` on validation and return test probabilities plus the chosen point.
#[allow(clippy::too_many_arguments)]
fn fit_predict(
    alg: &AlgorithmSpec,
    spec: &ExperimentSpec,
    train: &Dataset,
    train_groups: &GroupLabels,
    val: &Dataset,
    val_groups: &GroupLabels,
    test: &Dataset,
    test_groups: &GroupLabels,
    seed: u64,
) -> Result<(Vec<f64>, Hyper)> {
    let set = TrainingSet::new(train, train_groups, spec.include_group_features)?;
    let result = grid_search(alg, &set, val, val_groups, seed)?;
    let probs = result.best.predict(test, test_groups)?;
    Ok((probs, result.best_hyper))
}

fn completed(metrics: BTreeMap<String, f64>, hyper: Hyper, evaluation: EvaluationReport) -> Outcome {
    Outcome::Completed {
        metrics,
        hyper: Some(hyper),
        notes: evaluation.notes.clone(),
        evaluation: Some(evaluation),
    }
}

/// Granularity and ranking: train per scenario, evaluate on the finest groups.
fn grouped(p: &Prepared<'_>, d: &TrialData) -> Result<Vec<Cell>> {
    let spec = p.spec;
    let fine_test = labels(&p.finest, &d.test)?;
    let mut cells = Vec::new();
    for (s, scheme) in &p.scenarios {
        let (tl, vl, sl) = (labels(scheme, &d.train)?, labels(scheme, &d.val)?, labels(scheme, &d.test)?);
        for alg in &spec.algorithms {
            cells.push(timed(CellKey::new(&s.name, alg.kind.name(), ""), || {
                let (probs, hyper) = fit_predict(alg, spec, &d.train, &tl, &d.val, &vl, &d.test, &sl, d.seed)?;
                let report = evaluate(d.test.labels(), &probs, &fine_test)?;
                let metrics = if spec.study == StudyKind::Granularity {
                    granularity_metrics(spec, &report)?
                } else {
                    ranking_metrics(&report)?
                };
                Ok(completed(metrics, hyper, report))
            }));
        }
    }
    Ok(cells)
}

fn granularity_metrics(spec: &ExperimentSpec, r: &EvaluationReport) -> Result<BTreeMap<String, f64>> {
    let diff = r
        .tpr_difference
        .as_ref()
        .ok_or_else(|| Error::Undefined("fewer than 2 groups with positives in the test split".into()))?;
    let max = if spec.focus_groups.is_empty() {
        diff.max_difference
    } else {
        diff.among(&spec.focus_groups)?
    };
    let mut m = BTreeMap::from([
        ("max_tpr_difference".to_string(), max),
        ("soft_accuracy".to_string(), r.soft_accuracy),
    ]);
    if let Some(auc) = r.auc {
        m.insert("auc".into(), auc);
    }
    Ok(m)
}

fn ranking_metrics(r: &EvaluationReport) -> Result<BTreeMap<String, f64>> {
    let diff = r
        .tpr_difference
        .as_ref()
        .ok_or_else(|| Error::Undefined("fewer than 2 groups with positives in the test split".into()))?;
    let mut m = BTreeMap::from([
        ("max_tpr_difference".to_string(), diff.max_difference),
        ("soft_accuracy".to_string(), r.soft_accuracy),
    ]);
    if let Some(rank) = &r.rank_summary {
        m.insert("rank_a".into(), rank.rank_a);
        m.insert("rank_b".into(), rank.rank_b);
    }
    // A missing tau (constant base rates or TPRs) is flagged in the notes.
    if let Some(k) = r.kendall {
        m.insert("tau".into(), k.tau);
        m.insert("tau_p".into(), k.p_value);
    }
    Ok(m)
}

fn other_handling(p: &Prepared<'_>, d: &TrialData) -> Result<Vec<Cell>> {
    let spec = p.spec;
    let params = spec.other.as_ref().expect("validated");
    let other = params.other_group.as_str();
    let mut cells = Vec::new();
    for (s, scheme) in &p.scenarios {
        let (tl, vl, sl) = (labels(scheme, &d.train)?, labels(scheme, &d.val)?, labels(scheme, &d.test)?);
        let other_idx = sl.position(other).expect("checked");
        let other_test = sl.members(other_idx);
        let other_y: Vec<u8> = other_test.iter().map(|&i| d.test.labels()[i]).collect();
        for alg in &spec.algorithms {
            for &strategy in &params.strategies {
                let key = CellKey::new(&s.name, alg.kind.name(), strategy.name());
                if strategy == OtherStrategy::Ignore && alg.kind.requires_known_groups() {
                    cells.push((
                        key,
                        Outcome::NotApplicable {
                            reason: format!(
                                "{} cannot score the `{other}` group when it is unseen at training time",
                                alg.kind
                            ),
                        },
                        0.0,
                    ));
                    continue;
                }
                cells.push(timed(key, || {
                    let view = apply_other_strategy(&d.train, &tl, other, strategy)?;
                    let mut metrics = BTreeMap::new();
                    let (val, val_groups, test_groups) = match strategy {
                        OtherStrategy::Separate => (d.val.clone(), vl.clone(), sl.clone()),
                        OtherStrategy::Redistribute => {
                            let ids = view.train_groups.ids();
                            let vg = reassign(&d.val, &vl, &d.train, &tl, other, ids)?;
                            let tg = reassign(&d.test, &sl, &d.train, &tl, other, ids)?;
                            let total = view.reassigned.len().max(1) as f64;
                            for id in ids {
                                let n = view.reassigned.iter().filter(|g| *g == id).count();
                                metrics.insert(format!("reassigned:{id}"), n as f64 / total);
                            }
                            (d.val.clone(), vg, tg)
                        }
                        OtherStrategy::Ignore => {
                            let keep: Vec<usize> = (0..d.val.len()).filter(|&i| vl.id_of_row(i) != other).collect();
                            (d.val.select(&keep), vl.select(&keep).compact(), sl.clone())
                        }
                    };
                    let (probs, hyper) = fit_predict(
                        alg,
                        spec,
                        &view.train,
                        &view.train_groups,
                        &val,
                        &val_groups,
                        &d.test,
                        &test_groups,
                        d.seed,
                    )?;
                    let other_p: Vec<f64> = other_test.iter().map(|&i| probs[i]).collect();
                    metrics.insert("other_auc".into(), roc_auc(&other_y, &other_p)?);
                    let report = evaluate(d.test.labels(), &probs, &sl)?;
                    metrics.insert("soft_accuracy".into(), report.soft_accuracy);
                    if let Some(diff) = report.max_tpr_difference() {
                        metrics.insert("max_tpr_difference".into(), diff);
                    }
                    Ok(completed(metrics, hyper, report))
                }));
            }
        }
    }
    Ok(cells)
}

/// Labels of `ds` with its Other rows moved to their nearest training group.
fn reassign(
    ds: &Dataset,
    groups: &GroupLabels,
    train: &Dataset,
    train_groups: &GroupLabels,
    other: &str,
    ids: &[String],
) -> Result<GroupLabels> {
    let rows = groups.members_of(other);
    let moved = redistribute(ds, &rows, train, train_groups, other)?;
    let mut row_ids: Vec<&str> = (0..ds.len()).map(|i| groups.id_of_row(i)).collect();
    for (&r, g) in rows.iter().zip(&moved) {
        row_ids[r] = g;
    }
    let of_row = row_ids
        .iter()
        .map(|id| ids.iter().position(|g| g == id).expect("non-Other id"))
        .collect();
    GroupLabels::new(ids.to_vec(), of_row)
}

/// Rows of `id` in `ds`, shuffled by `stream` of the trial seed.
fn shuffled_members(groups: &GroupLabels, id: &str, seed: u64, stream: u64) -> Vec<usize> {
    let mut rows = groups.members_of(id);
    rows.shuffle(&mut seed::rng_for(seed, stream));
    rows
}

/// Train the probe model on `rows` of the training split and score the
/// target rows of `eval`.
fn probe_auc(
    probe: &ProbeParams,
    d: &TrialData,
    train_groups: &GroupLabels,
    rows: &[usize],
    eval: &Dataset,
    eval_groups: &GroupLabels,
    eval_rows: &[usize],
) -> Result<f64> {
    let train = d.train.select(rows);
    let groups = train_groups.select(rows).compact();
    let set = TrainingSet::new(&train, &groups, false)?;
    let model = train_baseline(&set, &probe.hyper, d.seed)?;
    let target = eval.select(eval_rows);
    let probs = model.predict(&target, &eval_groups.select(eval_rows).compact())?;
    roc_auc(target.labels(), &probs)
}

fn auc_outcome(auc: f64, extra: &[(&str, f64)], hyper: &Hyper) -> Outcome {
    let mut metrics = BTreeMap::from([("target_auc".to_string(), auc)]);
    for (k, v) in extra {
        metrics.insert(k.to_string(), *v);
    }
    Outcome::Completed {
        metrics,
        hyper: Some(hyper.clone()),
        evaluation: None,
        notes: Vec::new(),
    }
}

fn subgroup_probe(p: &Prepared<'_>, d: &TrialData) -> Result<Vec<Cell>> {
    let probe = p.spec.probe.as_ref().expect("validated");
    let tl = labels(&p.finest, &d.train)?;
    let sl = labels(&p.finest, &d.test)?;
    let target_test = sl.members_of(&probe.target);
    Ok(probe
        .donors
        .iter()
        .enumerate()
        .map(|(i, donor)| {
            timed(CellKey::new(probe_scenario(p), PROBE_ALGORITHM, donor), || {
                let rows = shuffled_members(&tl, donor, d.seed, 1 + i as u64);
                if rows.len() < probe.n {
                    return Err(Error::Validation(format!(
                        "donor `{donor}` has {} training rows, the probe needs {}",
                        rows.len(),
                        probe.n
                    )));
                }
                let auc = probe_auc(probe, d, &tl, &rows[..probe.n], &d.test, &sl, &target_test)?;
                Ok(auc_outcome(auc, &[], &probe.hyper))
            })
        })
        .collect())
}

/// Split of a budget between the two donors at `ratio` (share of the first).
fn donor_counts(ratio: f64, budget: usize) -> (usize, usize) {
    let a = ((ratio * budget as f64).round() as usize).min(budget);
    (a, budget - a)
}

fn mixture_probe(p: &Prepared<'_>, d: &TrialData) -> Result<Vec<Cell>> {
    let probe = p.spec.probe.as_ref().expect("validated");
    let scenario = probe_scenario(p);
    let tl = labels(&p.finest, &d.train)?;
    let vl = labels(&p.finest, &d.val)?;
    let sl = labels(&p.finest, &d.test)?;
    let a_rows = shuffled_members(&tl, &probe.donors[0], d.seed, 1);
    let b_rows = shuffled_members(&tl, &probe.donors[1], d.seed, 2);
    let t_rows = shuffled_members(&tl, &probe.target, d.seed, 3);
    let target_val = vl.members_of(&probe.target);
    let target_test = sl.members_of(&probe.target);
    let mix = |ratio: f64, budget: usize, m: usize| -> Vec<usize> {
        let (a, b) = donor_counts(ratio, budget);
        let mut rows: Vec<usize> = a_rows[..a].iter().chain(&b_rows[..b]).copied().collect();
        rows.extend_from_slice(&t_rows[..m]);
        rows
    };

    let started = Instant::now();
    let mut best: Option<(f64, f64)> = None;
    let mut errors = Vec::new();
    for &ratio in &probe.ratio_grid {
        match probe_auc(probe, d, &tl, &mix(ratio, probe.n, 0), &d.val, &vl, &target_val) {
            Ok(auc) if best.is_none_or(|(_, b)| auc > b) => best = Some((ratio, auc)),
            Ok(_) => {}
            Err(e) => errors.push(format!("ratio {ratio}: {e}")),
        }
    }
    let Some((ratio, _)) = best else {
        return Err(Error::GridFailed(errors));
    };
    let mut cells = vec![timed(CellKey::new(scenario, PROBE_ALGORITHM, DONORS_ONLY), || {
        let auc = probe_auc(probe, d, &tl, &mix(ratio, probe.n, 0), &d.test, &sl, &target_test)?;
        Ok(auc_outcome(auc, &[("best_ratio", ratio)], &probe.hyper))
    })];
    cells[0].2 += started.elapsed().as_secs_f64();
    for m in probe.counts() {
        cells.push(timed(CellKey::new(scenario, PROBE_ALGORITHM, TARGET_INCLUDED).at(m), || {
            let auc = probe_auc(probe, d, &tl, &mix(ratio, probe.n - m, m), &d.test, &sl, &target_test)?;
            Ok(auc_outcome(auc, &[("best_ratio", ratio)], &probe.hyper))
        }));
    }
    Ok(cells)
}
