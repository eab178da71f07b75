//! Fairness-aware training and evaluation over intersectional subgroups.
//!
//! Groups are conjunctions of demographic attributes (`race` x `sex` gives
//! ids like `B-F`). Six training algorithms ([`fairness`]) are tuned on a
//! validation split by `sqrt(soft_accuracy * (1 - max TPR difference))` and
//! scored per group ([`metrics`]). [`experiments`] runs multi-trial studies with
//! 95% intervals: training granularity, handling of a residual Other group,
//! cross-group predictivity probes and the rank correlation between base
//! rates and TPRs. [`cli`] is the `intersectional` command line.
//!
//! ```no_run
//! use intersectional::experiments::{planted, DataSource, ExperimentSpec, StudyKind};
//!
//! let spec = ExperimentSpec::new(
//!     StudyKind::RankingReification,
//!     DataSource::Synthetic(planted::monotone_base_rates(8, 300, 2.0, 21)),
//!     &["group"],
//! );
//! let report = spec.run()?;
//! print!("{}", intersectional::cli::render_report(&report));
//! # Ok::<(), intersectional::Error>(())
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod fairness;
pub mod groups;
pub mod metrics;
pub mod models;
pub mod seed;

pub use error::{Error, Result};
