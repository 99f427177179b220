//! Seeded multi-run studies and their reports.
//!
//! Every study is a pure function of its spec: each cell derives its own
//! seeds, cells may run on several threads, and results are collected in
//! spec order before verdicts are computed from the cell metrics alone.

pub mod benchmark;
pub mod discover;
pub mod parallel;
pub mod report;
pub mod risk;
pub mod stats;
pub mod sweep;

pub use benchmark::{benchmark_dataset, benchmark_study, benchmark_train_config, BenchmarkSpec};
pub use discover::{discover_asymmetry, AsymmetryRanking};
pub use report::{render_report, Aggregate, Cell, StudyReport, Verdict};
pub use risk::{risk_ordering_study, RiskSpec};
pub use sweep::{complementarity_sweep, SweepSpec};

/// Count of `true` values.
fn wins(flags: impl IntoIterator<Item = bool>) -> usize {
    flags.into_iter().filter(|&b| b).count()
}
