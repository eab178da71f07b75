//! Run a TOML study config through the library instead of the binary.
//!
//! cargo run --release --example run_config -- examples/configs/ranking.toml

use intersectional::cli::{render_report, RunConfig};

fn main() -> intersectional::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/granularity.toml").into());
    let cfg = RunConfig::from_file(&path)?;
    cfg.validate()?;
    let spec = cfg.to_spec()?;
    println!("{}: {} trials from seed {}", spec.study.name(), spec.n_trials, spec.seed);
    let report = spec.run()?;
    print!("{}", render_report(&report));
    println!("trial seeds {:?}", report.trial_seeds);
    Ok(())
}
