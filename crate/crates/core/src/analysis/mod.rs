//! Learning-progress metrics and group comparisons over session logs.

pub mod metrics;
pub mod report;
pub mod stats;

pub use metrics::{extract_metrics, SessionMetrics};
pub use report::{group_report, group_report_labeled, GroupReport, GroupSummary};
pub use stats::{mann_whitney, mann_whitney_with, spearman, MannWhitney, MwMethod, Spearman};
