//! Descriptive statistics and classical hypothesis tests.
//!
//! p-values come from regularized incomplete beta and gamma functions
//! evaluated by continued fractions ([`special`]).

mod describe;
mod hypothesis;
pub mod special;

use thiserror::Error;

pub use describe::{
    describe, quantile_sorted, render_frequency_table, CategoricalSummary, CategoryCount, ContinuousSummary, Summary,
};
pub use hypothesis::{chi_square_independence, one_way_anova, pooled_t_test, welch_t_test, TestKind, TestResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` has no non-missing values")]
    EmptyColumn(String),
    #[error("empty sample")]
    EmptySample,
    #[error("sample too small: need at least {needed}, got {got}")]
    Undersized { needed: usize, got: usize },
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("within-group variance is zero")]
    DegenerateVariance,
    #[error("contingency table has a zero row or column margin")]
    DegenerateMargin,
    #[error("contingency table must be at least 2x2, got {rows}x{cols}")]
    TableTooSmall { rows: usize, cols: usize },
    #[error("contingency table rows differ in length")]
    RaggedTable,
    #[error("non-finite value in sample")]
    NonFinite,
}
