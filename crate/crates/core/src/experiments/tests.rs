use super::*;
use crate::models::AlgorithmKind;
use proptest::prelude::*;

fn quick(kind: AlgorithmKind) -> AlgorithmSpec {
    AlgorithmSpec::new(kind).with_hyper("epochs", 5.0)
}

fn disparity_spec(study: StudyKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(
        study,
        DataSource::Synthetic(planted::base_rate_disparity(150, 3)),
        &["race", "sex"],
    );
    spec.n_trials = 2;
    spec.seed = 9;
    spec.algorithms = vec![quick(AlgorithmKind::Baseline)];
    spec
}

fn trial(t: usize, key: &CellKey, outcome: Outcome) -> TrialResult {
    TrialResult {
        trial: t,
        seed: t as u64,
        key: key.clone(),
        outcome,
        duration_secs: 0.0,
    }
}

fn metric(name: &str, v: f64) -> Outcome {
    Outcome::completed(BTreeMap::from([(name.to_string(), v)]))
}

#[test]
fn validation_rejects_bad_specs() {
    let mut spec = disparity_spec(StudyKind::Granularity);
    spec.n_trials = 1;
    assert!(spec.validate().is_err());

    let spec = disparity_spec(StudyKind::SubgroupPredictivity);
    assert!(spec.validate().is_err(), "probe settings are required");

    let spec = disparity_spec(StudyKind::OtherHandling);
    assert!(spec.validate().is_err(), "other settings are required");

    let mut spec = disparity_spec(StudyKind::Granularity);
    spec.scenarios = vec![Scenario::identity("a"), Scenario::identity("a")];
    assert!(spec.validate().is_err());
}

#[test]
fn one_success_of_five_is_incomplete() {
    let key = CellKey::new("fine", "baseline", "");
    let mut trials = vec![trial(0, &key, metric("auc", 0.7))];
    for t in 1..5 {
        trials.push(trial(t, &key, Outcome::Failed { error: "boom".into() }));
    }
    let cells = aggregate(&trials);
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].status, CellStatus::Incomplete);
    assert_eq!(cells[0].failed, 4);
    let auc = cells[0].metric("auc").unwrap();
    assert_eq!((auc.mean, auc.half_width, auc.n), (0.7, None, 1));
}

#[test]
fn fisher_summary_combines_tau_p() {
    let key = CellKey::new("fine", "baseline", "");
    let trials: Vec<TrialResult> = (0..2).map(|t| trial(t, &key, metric("tau_p", 0.5))).collect();
    let f = aggregate(&trials)[0].fisher.unwrap();
    assert!((f.statistic - 2.772588722239781).abs() < 1e-12);
    assert!(!f.significant);
}

#[test]
fn not_applicable_cells_are_marked() {
    let key = CellKey::new("fine", "gry", "ignore");
    let trials: Vec<TrialResult> = (0..3)
        .map(|t| trial(t, &key, Outcome::NotApplicable { reason: "unseen".into() }))
        .collect();
    let cell = &aggregate(&trials)[0];
    assert_eq!(cell.status, CellStatus::NotApplicable);
    assert!(cell.metrics.is_empty());
}

proptest! {
    #[test]
    fn aggregated_mean_is_arithmetic_mean(values in prop::collection::vec(-1e3f64..1e3, 2..12)) {
        let key = CellKey::new("s", "a", "");
        let trials: Vec<TrialResult> = values
            .iter()
            .enumerate()
            .map(|(t, &v)| trial(t, &key, metric("m", v)))
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let got = aggregate(&trials)[0].metric("m").unwrap().mean;
        prop_assert!((got - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

#[test]
fn granularity_study_is_deterministic_and_scenario_invariant() {
    let mut spec = disparity_spec(StudyKind::Granularity);
    spec.scenarios = vec![Scenario::identity("fine"), Scenario::identity("same")];
    let a = run_trials(&spec).unwrap();
    let b = run_trials(&spec).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.trial_seeds, vec![9, 10]);
    assert_eq!(a.cells.len(), 2);
    // Identical training groupings see identical evaluation rows and models.
    let x = a.cell("fine", "baseline", "").unwrap();
    let y = a.cell("same", "baseline", "").unwrap();
    assert_eq!(x.status, CellStatus::Complete);
    assert_eq!(x.metrics, y.metrics);
    assert!(x.metric("max_tpr_difference").is_some());
}

#[test]
fn granularity_evaluates_at_finest_groups() {
    let mut spec = disparity_spec(StudyKind::Granularity);
    spec.n_trials = 2;
    spec.scenarios = vec![Scenario::merged("race", &[("R1-F", "R1"), ("R1-M", "R1"), ("R2-F", "R2"), ("R2-M", "R2")])];
    let report = run_trials(&spec).unwrap();
    for t in &report.trials {
        let Outcome::Completed { evaluation: Some(e), .. } = &t.outcome else {
            panic!("trial failed: {:?}", t.outcome);
        };
        assert_eq!(e.groups.len(), 4);
    }
}

#[test]
fn unknown_merge_target_is_an_error() {
    let mut spec = disparity_spec(StudyKind::Granularity);
    spec.scenarios = vec![Scenario::merged("bad", &[("X-Y", "Z")])];
    assert!(run_trials(&spec).is_err());
}

#[test]
fn focus_groups_restrict_the_difference() {
    let mut spec = disparity_spec(StudyKind::Granularity);
    spec.focus_groups = vec!["R1-F".into(), "R1-M".into()];
    let focused = run_trials(&spec).unwrap();
    spec.focus_groups.clear();
    let full = run_trials(&spec).unwrap();
    let f = focused.cell("fine", "baseline", "").unwrap().metric("max_tpr_difference").unwrap().mean;
    let g = full.cell("fine", "baseline", "").unwrap().metric("max_tpr_difference").unwrap().mean;
    assert!(f <= g + 1e-12);
}

fn alias_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(
        StudyKind::OtherHandling,
        DataSource::Synthetic(planted::other_alias(200, 200, 5)),
        &["race"],
    );
    spec.n_trials = 2;
    spec.algorithms = vec![quick(AlgorithmKind::Baseline), AlgorithmSpec::new(AlgorithmKind::Gry).with_hyper("iterations", 3.0)];
    spec.other = Some(OtherParams {
        other_group: "Other".into(),
        strategies: OtherStrategy::ALL.to_vec(),
    });
    spec
}

#[test]
fn other_handling_marks_unseen_group_pairs() {
    let report = run_trials(&alias_spec()).unwrap();
    assert_eq!(report.cells.len(), 6);
    let gry = report.cell("fine", "gry", "ignore").unwrap();
    assert_eq!(gry.status, CellStatus::NotApplicable);
    for t in report.trials.iter().filter(|t| t.key.algorithm == "gry" && t.key.variant == "ignore") {
        assert!(matches!(t.outcome, Outcome::NotApplicable { .. }));
    }
    let base = report.cell("fine", "baseline", "ignore").unwrap();
    assert_eq!(base.status, CellStatus::Complete);
    assert!(base.metric("other_auc").is_some());
    let redistributed = report.cell("fine", "baseline", "redistribute").unwrap();
    let shares: f64 = ["A", "B", "C"]
        .iter()
        .map(|g| redistributed.metric(&format!("reassigned:{g}")).unwrap().mean)
        .sum();
    assert!((shares - 1.0).abs() < 1e-12);
}

#[test]
fn missing_other_group_is_an_error() {
    let mut spec = alias_spec();
    spec.other.as_mut().unwrap().other_group = "Elsewhere".into();
    assert!(matches!(run_trials(&spec), Err(Error::UnknownGroup(_))));
}

fn probe_spec(study: StudyKind, n: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(
        study,
        DataSource::Synthetic(planted::predictivity(300, true, 8)),
        &["race", "sex"],
    );
    spec.n_trials = 2;
    spec.probe = Some(ProbeParams {
        target: "B-F".into(),
        donors: vec!["W-F".into(), "B-M".into()],
        n,
        ratio_grid: vec![0.0, 1.0],
        target_counts: vec![],
        hyper: [("batch_size", 32.0), ("epochs", 5.0), ("learning_rate", 0.01)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
    });
    spec
}

#[test]
fn donor_too_small_names_the_donor() {
    let err = run_trials(&probe_spec(StudyKind::SubgroupPredictivity, 250)).unwrap_err();
    assert!(err.to_string().contains("W-F"), "{err}");
}

#[test]
fn subgroup_probe_reports_one_cell_per_donor() {
    let report = run_trials(&probe_spec(StudyKind::SubgroupPredictivity, 100)).unwrap();
    let donors: Vec<&str> = report.cells.iter().map(|c| c.key.variant.as_str()).collect();
    assert_eq!(donors, vec!["W-F", "B-M"]);
    assert!(report.cells.iter().all(|c| c.status == CellStatus::Complete));
}

#[test]
fn mixture_probe_emits_both_curves() {
    let report = run_trials(&probe_spec(StudyKind::MixtureProbe, 100)).unwrap();
    let keys: Vec<(String, Option<usize>)> =
        report.cells.iter().map(|c| (c.key.variant.clone(), c.key.point)).collect();
    assert_eq!(keys[0], (DONORS_ONLY.to_string(), None));
    let points: Vec<Option<usize>> = keys[1..].iter().map(|k| k.1).collect();
    assert_eq!(points, vec![Some(0), Some(25), Some(50), Some(75), Some(100)]);
    let ratio = report.cells[0].metric("best_ratio").unwrap();
    assert!(ratio.values.iter().all(|r| *r == 0.0 || *r == 1.0));
}

#[test]
fn mixture_budget_beyond_target_rows_is_an_error() {
    let mut spec = probe_spec(StudyKind::MixtureProbe, 100);
    spec.probe.as_mut().unwrap().target_counts = vec![0, 100];
    spec.probe.as_mut().unwrap().n = 200;
    assert!(run_trials(&spec).is_err());
}

#[test]
fn ranking_study_records_tau_and_fisher() {
    let mut spec = ExperimentSpec::new(
        StudyKind::RankingReification,
        DataSource::Synthetic(planted::monotone_base_rates(4, 200, 1.5, 2)),
        &["group"],
    );
    spec.n_trials = 2;
    spec.algorithms = vec![quick(AlgorithmKind::Baseline)];
    let report = run_trials(&spec).unwrap();
    let cell = report.cell("fine", "baseline", "").unwrap();
    assert!(cell.metric("tau").is_some());
    assert!(cell.fisher.is_some());
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("scenario,algorithm,variant,point,metric,mean,half_width,n,status,combined_p"));
    assert!(text.lines().any(|l| l.contains(",tau,")));
}

#[test]
fn permuted_labels_keep_the_base_rate() {
    let spec = ExperimentSpec::new(
        StudyKind::RankingReification,
        DataSource::Synthetic(planted::monotone_base_rates(4, 100, 1.5, 2)),
        &["group"],
    );
    let ds = spec.data.load().unwrap();
    let shuffled = permute(&ds, 4).unwrap();
    assert_eq!(ds.positives(), shuffled.positives());
    assert_ne!(ds.labels(), shuffled.labels());
}

#[test]
fn spec_round_trips_through_json() {
    let mut spec = probe_spec(StudyKind::MixtureProbe, 50);
    spec.filter = Some(crate::groups::GroupFilter::default());
    let text = serde_json::to_string(&spec).unwrap();
    let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(spec, back);
}
