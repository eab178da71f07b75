//! The `intersectional` command line: config parsing, dispatch and output
//! files.
//!
//! ```text
//! intersectional <train|evaluate|study|generate|validate-config> --config run.toml [--out DIR]
//!     [--seed N] [--trials N] [--jobs N] [--quiet] [--model PATH]
//! ```
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

mod config;
mod render;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{AlgorithmEntry, CsvSource, DataConfig, RunConfig, StudyConfig};
pub use render::{format_ci, render_evaluation, render_report};

use crate::data::{split, standardize, write_csv, Dataset, SplitSpec, Standardizer};
use crate::error::{Error, Result};
use crate::experiments::{run_on, StudyReport};
use crate::fairness::{grid_search, GridPoint, Hyper};
use crate::groups::{GroupLabels, GroupingScheme};
use crate::metrics::{evaluate, EvaluationReport};
use crate::models::{FairPredictor, TrainingSet};

/// Default output directory when neither `--out` nor the config names one.
pub const OUT_ENV: &str = "INTERSECTIONAL_OUT";

#[derive(Debug, Parser)]
#[command(name = "intersectional", version, about = "Fairness training and evaluation over intersectional subgroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one algorithm (grid-searched on validation) and write the model and its test report.
    Train(Common),
    /// Score a saved model on the config's dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file written by `train`; defaults to OUT/model.bin.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the configured study end to end.
    Study(Common),
    /// Write the configured synthetic dataset as CSV.
    Generate(Common),
    /// Check a config without running anything.
    ValidateConfig(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.n_trials = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Validation(format!("output directory {} is not writable: {e}", dir.display())))?;
        Ok(dir)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Run the command line and return the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let common = match &cli.command {
        Command::Train(c) | Command::Study(c) | Command::Generate(c) | Command::ValidateConfig(c) => c,
        Command::Evaluate { common, .. } => common,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(common.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Train(c) => train(c),
        Command::Evaluate { common, model } => evaluate_saved(common, model.as_deref()),
        Command::Study(c) => study(c),
        Command::Generate(c) => generate(c),
        Command::ValidateConfig(c) => {
            let cfg = c.load()?;
            if cfg.study.is_some() {
                cfg.to_spec()?.validate()?;
            }
            c.say(format!("{}: ok", c.config.display()));
            Ok(())
        }
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    base_seed: u64,
    n_trials: usize,
    trial_seeds: Vec<u64>,
    trial_seconds: Vec<f64>,
    total_seconds: f64,
    threads: usize,
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn study(c: &Common) -> Result<()> {
    let started = Instant::now();
    let cfg = c.load()?;
    let spec = cfg.to_spec()?;
    spec.validate()?;
    let out = c.out_dir(&cfg)?;
    let data = spec.data.load()?;
    c.say(format!(
        "{} study: {} rows, {} trials, {} algorithms",
        spec.study.name(),
        data.len(),
        spec.n_trials,
        spec.algorithms.len()
    ));
    let report = run_on(&spec, data)?;
    write_study(&out, &cfg, &report, started)?;
    let table = render_report(&report);
    if !c.quiet {
        print!("{table}");
    }
    c.say(format!("wrote {}", out.display()));
    Ok(())
}

fn write_study(out: &Path, cfg: &RunConfig, report: &StudyReport, started: Instant) -> Result<()> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let manifest = Manifest {
        command: "study",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(&cfg.canonical()?),
        base_seed: report.seed,
        n_trials: report.n_trials,
        trial_seeds: report.trial_seeds.clone(),
        trial_seconds: report.trial_durations(),
        total_seconds: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    write(out, "report.json", report.to_json()?)?;
    write(out, "report.csv", csv)?;
    write(out, "table.txt", render_report(report))?;
    write(out, "manifest.json", serde_json::to_string_pretty(&manifest)?)
}

/// Everything `evaluate` needs to score new rows the way `train` saw them.
#[derive(Debug, Clone, serde::Deserialize, Serialize)]
struct ModelBundle {
    axes: Vec<String>,
    merge: std::collections::BTreeMap<String, String>,
    standardizer: Option<Standardizer>,
    predictor: serde_json::Value,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    algorithm: String,
    seed: u64,
    hyper: &'a Hyper,
    grid: &'a [GridPoint],
    test: &'a EvaluationReport,
}

fn training_scheme(cfg: &RunConfig, ds: &Dataset) -> Result<GroupingScheme> {
    let axes: Vec<&str> = cfg.axes.iter().map(String::as_str).collect();
    let fine = GroupingScheme::conjunction(ds, &axes)?;
    match cfg.scenarios.first() {
        Some(s) => s.scheme(&fine),
        None => Ok(fine),
    }
}

fn train(c: &Common) -> Result<()> {
    let started = Instant::now();
    let cfg = c.load()?;
    let [alg] = cfg.algorithms.as_slice() else {
        return Err(Error::Validation(format!(
            "train needs exactly one [[algorithms]] entry, found {}",
            cfg.algorithms.len()
        )));
    };
    alg.validate()?;
    let out = c.out_dir(&cfg)?;
    let data = cfg.data.source()?.load()?;
    let parts = split(&data, &SplitSpec::with_seed(cfg.seed))?;
    let (train, val, test, standardizer) = if cfg.standardize {
        let (mut v, s) = standardize(&parts.train, &[&parts.train, &parts.val, &parts.test])?;
        let test = v.pop().expect("three outputs");
        let val = v.pop().expect("three outputs");
        (v.pop().expect("three outputs"), val, test, Some(s))
    } else {
        (parts.train, parts.val, parts.test, None)
    };
    let scheme = training_scheme(&cfg, &data)?;
    let (tl, vl, sl) = (scheme.assign(&train)?, scheme.assign(&val)?, scheme.assign(&test)?);
    let set = TrainingSet::new(&train, &tl, cfg.include_group_features)?;
    c.say(format!("training {} over {} grid points", alg.kind, alg.grid_size()));
    let result = grid_search(alg, &set, &val, &vl, cfg.seed)?;
    let probs = result.best.predict(&test, &sl)?;
    let report = evaluate(test.labels(), &probs, &sl)?;

    let bundle = ModelBundle {
        axes: cfg.axes.clone(),
        merge: cfg.scenarios.first().map(|s| s.merge.clone()).unwrap_or_default(),
        standardizer,
        predictor: serde_json::from_str(&result.best.to_json()?)?,
    };
    write(&out, "model.bin", serde_json::to_string(&bundle)?)?;
    let summary = TrainReport {
        algorithm: alg.kind.name().into(),
        seed: cfg.seed,
        hyper: &result.best_hyper,
        grid: &result.table,
        test: &report,
    };
    write(&out, "report.json", serde_json::to_string_pretty(&summary)?)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write(&out, "report.csv", csv)?;
    let table = render_evaluation(&report);
    write(&out, "table.txt", &table)?;
    let manifest = Manifest {
        command: "train",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(&cfg.canonical()?),
        base_seed: cfg.seed,
        n_trials: 1,
        trial_seeds: vec![cfg.seed],
        trial_seconds: vec![started.elapsed().as_secs_f64()],
        total_seconds: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    write(&out, "manifest.json", serde_json::to_string_pretty(&manifest)?)?;
    if !c.quiet {
        print!("{table}");
    }
    c.say(format!("wrote {}", out.display()));
    Ok(())
}

fn evaluate_saved(c: &Common, model: Option<&Path>) -> Result<()> {
    let cfg = c.load()?;
    let out = c.out_dir(&cfg)?;
    let path = model.map(Path::to_path_buf).unwrap_or_else(|| out.join("model.bin"));
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Validation(format!("cannot read model {}: {e}", path.display())))?;
    let bundle: ModelBundle = serde_json::from_str(&text)?;
    let predictor = FairPredictor::from_json(&bundle.predictor.to_string())?;
    let data = cfg.data.source()?.load()?;
    let data = match &bundle.standardizer {
        Some(s) => s.apply(&data)?,
        None => data,
    };
    let axes: Vec<&str> = bundle.axes.iter().map(String::as_str).collect();
    let fine = GroupingScheme::conjunction(&data, &axes)?;
    let groups: GroupLabels = fine.merge("model", &bundle.merge)?.assign(&data)?;
    let probs = predictor.predict(&data, &groups)?;
    let report = evaluate(data.labels(), &probs, &groups)?;
    write(&out, "report.json", serde_json::to_string_pretty(&report)?)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write(&out, "report.csv", csv)?;
    let table = render_evaluation(&report);
    write(&out, "table.txt", &table)?;
    if !c.quiet {
        print!("{table}");
    }
    c.say(format!("wrote {}", out.display()));
    Ok(())
}

/// File name `generate` writes inside the output directory.
pub const GENERATED_CSV: &str = "data.csv";

fn generate(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let Some(spec) = &cfg.data.synthetic else {
        return Err(Error::Validation("generate needs a [data.synthetic] section".into()));
    };
    let ds = crate::data::generate_synthetic(spec)?;
    let out = c.out_dir(&cfg)?;
    let mut buf = Vec::new();
    write_csv(&ds, &mut buf)?;
    write(&out, GENERATED_CSV, buf)?;
    c.say(format!("wrote {} rows to {}", ds.len(), out.join(GENERATED_CSV).display()));
    Ok(())
}
