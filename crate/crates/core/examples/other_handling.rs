//! Three ways to treat a residual "Other" group whose rows secretly behave like
//! group A.
//!
//! cargo run --release --example other_handling

use intersectional::cli::render_report;
use intersectional::experiments::{planted, DataSource, ExperimentSpec, OtherParams, StudyKind};
use intersectional::fairness::AlgorithmSpec;
use intersectional::groups::OtherStrategy;
use intersectional::models::AlgorithmKind;

fn main() -> intersectional::Result<()> {
    let mut spec = ExperimentSpec::new(
        StudyKind::OtherHandling,
        DataSource::Synthetic(planted::other_alias(300, 150, 41)),
        &["race"],
    );
    spec.algorithms = vec![AlgorithmSpec::new(AlgorithmKind::Baseline), AlgorithmSpec::new(AlgorithmKind::Gry)];
    spec.other = Some(OtherParams {
        other_group: "Other".into(),
        strategies: OtherStrategy::ALL.to_vec(),
    });
    spec.n_trials = 3;
    let report = spec.run()?;
    print!("{}", render_report(&report));
    if let Some(c) = report.cell("fine", "baseline", "redistribute") {
        for (name, m) in c.metrics.iter().filter(|(k, _)| k.starts_with("reassigned:")) {
            println!("{name}: {:.1}% of Other rows", 100.0 * m.mean);
        }
    }
    Ok(())
}
