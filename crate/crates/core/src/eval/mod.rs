//! Scoring against ground truth, per-category statistics and paired
//! comparison of two methods.

mod hypothesis;
mod report;
mod score;
mod stats;

use thiserror::Error;

pub use hypothesis::{
    paired_t, shapiro_wilk, test_paired, wilcoxon_signed_rank, PairedOutcome, PairedTest, ShapiroWilk, NORMALITY_ALPHA,
};
pub use report::{EvaluationReport, FlaggedCase, ReportFormat};
pub use score::{report_label, score_case, CaseScore};
pub use stats::{aggregate, compare, improvement, round3, CategoryComparison, CategorySummary, Summary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("at least {needed} cases required, got {got}")]
    InsufficientCases { needed: usize, got: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("case ids differ at position {index}: {baseline:?} vs {proposed:?}")]
    CaseIdMismatch { index: usize, baseline: Option<String>, proposed: Option<String> },
}
