//! Binary RBF support vector machines: SMO training, stratified k-fold
//! cross-validation and cost/gamma grid search.

mod cv;
mod kernel;
mod metrics;
mod model;
mod smo;

use thiserror::Error;

pub use cv::{grid_search, stratified_folds, Grid, GridCell, GridResult};
pub use kernel::rbf_kernel;
pub use metrics::{metrics, ConfusionMatrix, Metrics};
pub use model::{Prediction, SvmModel};
pub use smo::{dual_objective, max_kkt_violation, train_smo, ClassWeights, SmoConfig, SmoFit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("labels must be -1 or +1, got {0}")]
    BadLabel(i8),
    #[error("features contain non-finite values")]
    NonFinite,
    #[error("class {class} has {size} rows, fewer than k = {k}")]
    ClassTooSmall { class: i8, size: usize, k: usize },
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("grid has no cells")]
    EmptyGrid,
    #[error("every grid cell failed")]
    AllCellsFailed,
}
