//! Search the published baseline grid on the validation split and print the
//! whole table; the selected row maximizes sqrt(acc * (1 - max diff)).
//!
//! cargo run --release --example grid_search

use intersectional::data::{generate_synthetic, split, standardize, SplitSpec};
use intersectional::experiments::planted;
use intersectional::fairness::{grid_search, AlgorithmSpec};
use intersectional::groups::GroupingScheme;
use intersectional::models::{AlgorithmKind, TrainingSet};

fn main() -> intersectional::Result<()> {
    let ds = generate_synthetic(&planted::base_rate_disparity(400, 5))?;
    let parts = split(&ds, &SplitSpec::with_seed(1))?;
    let (scaled, _) = standardize(&parts.train, &[&parts.train, &parts.val])?;
    let scheme = GroupingScheme::conjunction(&ds, &["race", "sex"])?;
    let train_groups = scheme.assign(&scaled[0])?;
    let val_groups = scheme.assign(&scaled[1])?;
    let set = TrainingSet::new(&scaled[0], &train_groups, true)?;

    let spec = AlgorithmSpec::published(AlgorithmKind::Baseline);
    println!("{} grid points", spec.grid_size());
    let result = grid_search(&spec, &set, &scaled[1], &val_groups, 0)?;
    for (i, row) in result.table.iter().enumerate() {
        let mark = if i == result.best_index { "*" } else { " " };
        match &row.objective {
            Some(o) => println!(
                "{mark} {:?}  objective {:.4}  acc {:.3}  diff {:.3}",
                row.hyper, o.value, o.soft_accuracy, o.max_tpr_difference
            ),
            None => println!("{mark} {:?}  failed: {}", row.hyper, row.error.as_deref().unwrap_or("?")),
        }
    }
    println!("selected {:?}", result.best_hyper);
    Ok(())
}
