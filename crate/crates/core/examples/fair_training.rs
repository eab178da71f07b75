//! Train every algorithm with its default parameters on a dataset with planted
//! base-rate disparity and compare test accuracy with the largest TPR gap.
//!
//! cargo run --release --example fair_training

use intersectional::data::{generate_synthetic, split, standardize, SplitSpec};
use intersectional::experiments::planted;
use intersectional::fairness::{default_hyper, train_algorithm};
use intersectional::groups::GroupingScheme;
use intersectional::metrics::evaluate;
use intersectional::models::{AlgorithmKind, TrainingSet};

fn main() -> intersectional::Result<()> {
    let ds = generate_synthetic(&planted::base_rate_disparity(500, 3))?;
    let parts = split(&ds, &SplitSpec::with_seed(0))?;
    let (scaled, _) = standardize(&parts.train, &[&parts.train, &parts.test])?;
    let (train, test) = (&scaled[0], &scaled[1]);

    let scheme = GroupingScheme::conjunction(&ds, &["race", "sex"])?;
    let (train_groups, test_groups) = (scheme.assign(train)?, scheme.assign(test)?);
    let set = TrainingSet::new(train, &train_groups, true)?;

    println!("{:<9} {:>9} {:>13}", "algorithm", "soft acc", "max TPR diff");
    for kind in [
        AlgorithmKind::Baseline,
        AlgorithmKind::Rwt,
        AlgorithmKind::Rdc,
        AlgorithmKind::Los,
        AlgorithmKind::Grp,
        AlgorithmKind::Gry,
    ] {
        let model = train_algorithm(kind, &set, &default_hyper(kind), 11)?;
        let report = evaluate(test.labels(), &model.predict(test, &test_groups)?, &test_groups)?;
        println!(
            "{:<9} {:>9.3} {:>13.3}",
            kind.name(),
            report.soft_accuracy,
            report.max_tpr_difference().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
