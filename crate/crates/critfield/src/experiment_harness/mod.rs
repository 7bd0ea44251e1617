//! Monte-Carlo experiments, normality diagnostics and report output.

mod config;
mod experiments;
mod report;
pub mod selftest;
pub mod stats;

use sha2::{Digest, Sha256};

pub use config::{
    AsConvergenceConfig, ChaosConfig, ExperimentConfig, PredictionConfig, Thresholds, WeightConfig,
};
pub use experiments::{
    as_schedule, chaos_decomposition, compute_constants, field_seed, find_one, kac_rice_variance,
    run_as_convergence, run_clt_experiment, run_mean_experiment, run_variance_scaling, sample_field, ConstantRow,
    KacRiceRow, BOOTSTRAP_REPLICATES, WINDOW_CHECK_STRIDE,
};
pub use report::{
    chaos_csv, counts_csv, critical_points_csv, emit_report, ensure_dir, profile_csv, write_text, histogram_svg, loglog_svg, summary_rows, to_csv, AsConvergenceReport,
    AsConvergenceRow, AsConvergenceStep, CellReport, ExperimentKind, ExperimentReport, FinderTotals,
    NormalityCheck, Prediction, ScalingFit, SummaryRow,
};

/// Seed of the substream named by `(domain, key)` under `master`: the first 8 bytes of a SHA-256
/// counter hash, so it does not depend on scheduling.
pub fn substream_seed(master: u64, domain: &str, key: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(key.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
