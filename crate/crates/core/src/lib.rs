//! Analytics engine for routinely collected clinical tables: typed ingestion,
//! cohort flowcharts, descriptive statistics and hypothesis tests,
//! clustering, Bayesian-network structure learning and inference, RBF-SVM
//! model selection, a synthetic cohort generator and a model artifact format.

pub mod analysis;
pub mod bayesnet;
pub mod clustering;
pub mod cohort;
pub mod matrix;
pub mod registry;
pub mod stats;
pub mod svm;
pub mod synth;
pub mod tabular;
