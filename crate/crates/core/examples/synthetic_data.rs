//! Generate a planted dataset, round-trip it through CSV, split it and look at
//! the group structure under two grouping schemes.
//!
//! cargo run --example synthetic_data

use std::collections::BTreeMap;

use intersectional::data::{generate_synthetic, read_csv, split, standardize, write_csv, CsvSchema, SplitSpec};
use intersectional::experiments::planted;
use intersectional::groups::{filter_groups, GroupFilter, GroupingScheme};

fn main() -> intersectional::Result<()> {
    let ds = generate_synthetic(&planted::base_rate_disparity(400, 7))?;
    println!("{} rows, {} features, {} positives", ds.len(), ds.dim(), ds.positives());

    let mut buf = Vec::new();
    write_csv(&ds, &mut buf)?;
    let text = String::from_utf8(buf).expect("csv is utf-8");
    println!("csv header: {}", text.lines().next().unwrap_or(""));
    let back = read_csv(text.as_bytes(), &CsvSchema::for_dataset(&ds))?;
    assert_eq!(back.labels(), ds.labels());

    let fine = GroupingScheme::conjunction(&ds, &["race", "sex"])?;
    let by_race = fine.merge(
        "race only",
        &BTreeMap::from([
            ("R1-F".to_string(), "R1".to_string()),
            ("R1-M".to_string(), "R1".to_string()),
            ("R2-F".to_string(), "R2".to_string()),
            ("R2-M".to_string(), "R2".to_string()),
        ]),
    )?;
    for scheme in [&fine, &by_race] {
        let labels = scheme.assign(&ds)?;
        println!("{:?}:", scheme.group_ids());
        for id in labels.ids() {
            let rows = labels.members_of(id);
            let pos = rows.iter().filter(|&&i| ds.labels()[i] == 1).count();
            println!("  {id:<5} {:>4} rows, base rate {:.2}", rows.len(), pos as f64 / rows.len() as f64);
        }
    }

    let strict = GroupFilter {
        min_count: 300,
        min_pos: 150,
        min_neg: 100,
    };
    let (kept, dropped) = filter_groups(&ds, &fine, &strict)?;
    println!("filter kept {} rows, dropped {dropped:?}", kept.len());

    let parts = split(&ds, &SplitSpec::with_seed(0))?;
    println!("split: train {}, val {}, test {}", parts.train.len(), parts.val.len(), parts.test.len());
    let (scaled, stats) = standardize(&parts.train, &[&parts.train, &parts.test])?;
    let col0: Vec<f64> = scaled[0].features().column(0);
    let mean = col0.iter().sum::<f64>() / col0.len() as f64;
    println!("train feature 0 after scaling: mean {mean:.1e} (raw mean {:.3})", stats.mean[0]);
    Ok(())
}
