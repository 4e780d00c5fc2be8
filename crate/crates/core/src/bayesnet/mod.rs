//! Discrete Bayesian networks: BIC structure search by hill climbing, an
//! exhaustive oracle for small variable sets, CPT fitting, exact inference
//! by variable elimination, and cause extraction.

mod dag;
mod data;
mod enumerate;
mod inference;
mod params;
mod score;
mod search;

use thiserror::Error;

use crate::tabular::TabularError;

pub use dag::{causal_paths, CausalPaths, Dag};
pub use enumerate::{all_dags, enumerate_best_dag, MAX_ENUMERATED_VARIABLES};
pub use inference::{query, query_indexed, Evidence, Posterior};
pub use params::{fit_parameters, BayesNet};
pub use score::{bic_score, ScoredDag};
pub use search::{hill_climb, is_local_optimum, HillClimbConfig, SCORE_TOL};

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("variable `{0}` is not categorical")]
    NotCategorical(String),
    #[error("variable `{0}` has missing values")]
    Incomplete(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{value}` is not a category of `{variable}`")]
    UnknownCategory { variable: String, value: String },
    #[error("target `{0}` also appears as evidence")]
    TargetInEvidence(String),
    #[error("evidence has zero probability")]
    ZeroProbabilityEvidence,
    #[error("edge {from} -> {to} is both forbidden and required")]
    ConflictingEdge { from: String, to: String },
    #[error("required edges form a cycle")]
    RequiredCycle,
    #[error("edge {from} -> {to} would create a cycle")]
    Cycle { from: String, to: String },
    #[error("exhaustive search supports at most 4 variables, got {0}")]
    TooManyVariables(usize),
    #[error("need at least two variables, got {0}")]
    TooFewVariables(usize),
    #[error("dataset has no rows")]
    NoRows,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}
