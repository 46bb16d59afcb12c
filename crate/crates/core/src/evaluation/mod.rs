//! Binary-classification metrics, curves, significance tests, run
//! aggregation and wall-clock timing.

mod curves;
mod metrics;
mod report;
mod stats;
mod timing;

pub use curves::{roc_pr_auc, Curves};
pub use metrics::{confusion, sensitivity, specificity, threshold_sweep, ConfusionCounts, ThresholdRow};
pub use report::{EvalReport, RateInterval, ThresholdSummary};
pub use stats::{
    aggregate, aggregate_runs, confidence_interval, median, midranks, rank_sum_test, wilcoxon_rank_sum, Aggregate,
    RankSumDistribution, RankSumMethod, RankSumTest, EXACT_MAX_SMALLER_SAMPLE,
};
pub use timing::{time_action, time_repeated, RepeatedTiming, Timing};

/// Decision thresholds reported by default.
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;
