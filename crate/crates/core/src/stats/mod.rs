//! Classification metrics and significance tests.

mod hypothesis;
mod metrics;

pub use hypothesis::{
    average_ranks, f1_summary, paired_ttest, t_p_value, two_sample_ttest, wilcoxon_from_differences,
    wilcoxon_signed_rank, Alternative, TestKind, TestResult, WILCOXON_EXACT_MAX,
};
pub use metrics::{
    accuracy, confusion_matrix, macro_f1_grid_markdown, precision_recall_f1, ClassMetrics, ConfusionMatrix,
    EvaluationReport,
};
