//! Rare-element estimation, exact set-cover optimum for small samples,
//! test-trial execution and error/query summaries.

mod cover;
mod rare;
mod summary;
mod trials;

pub use cover::{bruteforce_set_cover_opt, MAX_BRUTEFORCE_SIZE};
pub use rare::{estimate_rare_probability, exact_rare_probability, expected_opt_bound, RareEstimate};
pub use summary::{
    query_decrease_pct, quantile, summarize_errors, ErrorSummary, Histogram, LearnerSummary,
    MetricSummary, Quantiles, ABS_OVER_EPS_EDGES, RELATIVE_PCT_EDGES,
};
pub use trials::{
    check_conditional_accuracy, run_trials, ConditionalReport, DistributionPairs, LearnerOutcome,
    PairSource, PermutationPairs, TrialRecord, QUERYOPT, SIMPLE,
};
