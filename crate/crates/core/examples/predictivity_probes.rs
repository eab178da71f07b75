//! How well does a model trained on one subgroup predict another? With a
//! planted interaction only the target's own rows carry its rule.
//!
//! cargo run --release --example predictivity_probes

use intersectional::cli::render_report;
use intersectional::experiments::{
    default_probe_hyper, default_ratio_grid, planted, DataSource, ExperimentSpec, ProbeParams, StudyKind,
};

fn probe(study: StudyKind, donors: &[&str]) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(
        study,
        DataSource::Synthetic(planted::predictivity(400, true, 31)),
        &["race", "sex"],
    );
    spec.probe = Some(ProbeParams {
        target: "B-F".into(),
        donors: donors.iter().map(|d| d.to_string()).collect(),
        n: 120,
        ratio_grid: default_ratio_grid(),
        target_counts: vec![],
        hyper: default_probe_hyper(),
    });
    spec.n_trials = 3;
    spec
}

fn main() -> intersectional::Result<()> {
    let single = probe(StudyKind::SubgroupPredictivity, &["B-F", "B-M", "W-F", "W-M"]).run()?;
    print!("{}", render_report(&single));
    println!();
    let mixture = probe(StudyKind::MixtureProbe, &["W-F", "B-M"]).run()?;
    print!("{}", render_report(&mixture));
    Ok(())
}
