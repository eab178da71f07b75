//! Does a model's TPR order follow the groups' base-rate order? Run once on
//! real labels and once with labels shuffled, where tau should be n.s.
//!
//! cargo run --release --example ranking_study

use intersectional::cli::render_report;
use intersectional::experiments::{planted, DataSource, ExperimentSpec, StudyKind};
use intersectional::fairness::AlgorithmSpec;
use intersectional::models::AlgorithmKind;

fn main() -> intersectional::Result<()> {
    let mut spec = ExperimentSpec::new(
        StudyKind::RankingReification,
        DataSource::Synthetic(planted::monotone_base_rates(8, 250, 2.0, 21)),
        &["group"],
    );
    spec.algorithms = vec![AlgorithmSpec::new(AlgorithmKind::Baseline), AlgorithmSpec::new(AlgorithmKind::Rwt)];
    let report = spec.run()?;
    print!("{}", render_report(&report));

    println!("\nshuffled labels:");
    spec.permute_labels = true;
    spec.algorithms.truncate(1);
    let null = spec.run()?;
    print!("{}", render_report(&null));
    if let Some(f) = null.cells.first().and_then(|c| c.fisher) {
        println!("combined p = {:.3}", f.combined_p);
    }
    Ok(())
}
