//! End-to-end analyses that turn a cohort into an exportable model.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bayesnet::{
    causal_paths, fit_parameters, hill_climb, BayesError, BayesNet, CausalPaths, HillClimbConfig, ScoredDag,
};
use crate::registry::{ModelArtifact, RegistryError};
use crate::svm::{grid_search, metrics, train_smo, Grid, GridResult, SmoConfig, SvmError};
use crate::tabular::{fit_encoder, ColumnKind, Dataset, TabularError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("target `{0}` must be a categorical column")]
    BadTarget(String),
    #[error("`{label}` is not a category of `{target}`")]
    UnknownPositiveLabel { target: String, label: String },
    #[error("target `{0}` cannot also be a feature")]
    TargetIsFeature(String),
    #[error("no variables selected")]
    NoVariables,
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesAnalysisConfig {
    /// Network nodes; the target is added when absent.
    pub variables: Vec<String>,
    pub target: String,
    #[serde(default)]
    pub hill_climb: HillClimbConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Forbid edges out of the target.
    #[serde(default = "yes")]
    pub target_as_sink: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesAnalysis {
    pub scored: ScoredDag,
    pub paths: CausalPaths,
    pub network: BayesNet,
    pub artifact: ModelArtifact,
}

/// Structure search, parameter fit and causal readout for one target.
pub fn run_bayesnet(ds: &Dataset, config: &BayesAnalysisConfig) -> Result<BayesAnalysis, AnalysisError> {
    let mut vars = config.variables.clone();
    if !vars.contains(&config.target) {
        vars.push(config.target.clone());
    }
    if vars.len() < 2 {
        return Err(AnalysisError::NoVariables);
    }
    let data = ds.select_columns(&vars)?;
    let mut hc = config.hill_climb.clone();
    if config.target_as_sink {
        hc = hc.with_sink(&config.target, &vars);
    }
    let scored = hill_climb(&data, &hc)?;
    let network = fit_parameters(&scored.dag, &data, config.alpha)?;
    let paths = causal_paths(&scored.dag, &config.target)?;
    let artifact = ModelArtifact::bayes_net(
        network.clone(),
        &config.target,
        json!({ "analysis": config, "n_rows": data.n_rows() }),
        json!({ "bic": scored.total, "edges": scored.dag.edge_count() }),
    )?;
    Ok(BayesAnalysis {
        scored,
        paths,
        network,
        artifact,
    })
}

fn default_folds() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmAnalysisConfig {
    pub features: Vec<String>,
    pub target: String,
    /// Category of `target` treated as the positive class.
    pub positive: String,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub smo: SmoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmAnalysis {
    pub grid: GridResult,
    pub artifact: ModelArtifact,
}

/// Grid search, then a refit of the best cell on every row.
pub fn run_svm_grid(ds: &Dataset, config: &SvmAnalysisConfig) -> Result<SvmAnalysis, AnalysisError> {
    if config.features.is_empty() {
        return Err(AnalysisError::NoVariables);
    }
    if config.features.contains(&config.target) {
        return Err(AnalysisError::TargetIsFeature(config.target.clone()));
    }
    let (_, spec, _) = ds.require(&config.target)?;
    if spec.kind != ColumnKind::Categorical {
        return Err(AnalysisError::BadTarget(config.target.clone()));
    }
    let positive = spec
        .category_index(&config.positive)
        .ok_or_else(|| AnalysisError::UnknownPositiveLabel {
            target: config.target.clone(),
            label: config.positive.clone(),
        })? as u32;
    let negative_label = match spec.category_labels() {
        [a, b] => if a == &config.positive { b } else { a }.clone(),
        _ => format!("not {}", config.positive),
    };
    let y: Vec<i8> = ds
        .categorical_codes(&config.target)?
        .iter()
        .map(|c| c.map(|c| if c == positive { 1 } else { -1 }))
        .collect::<Option<_>>()
        .ok_or_else(|| TabularError::IncompleteColumn(config.target.clone()))?;

    let encoder = fit_encoder(ds, &config.features)?;
    let x = encoder.encode(ds)?;
    let grid = grid_search(&x, &y, &config.grid, config.folds, config.seed, &config.smo)?;
    let best = grid.best().clone();
    let fit = train_smo(&x, &y, best.cost, best.gamma, &config.smo)?;
    let model = fit
        .model
        .with_labels(negative_label, config.positive.clone())
        .with_encoder_fingerprint(encoder.fingerprint());
    let cv = best.confusion.map(|cm| (cm, metrics(&cm).ok()));
    let artifact = ModelArtifact::svm(
        encoder,
        model,
        ds.schema(),
        json!({ "analysis": config, "n_rows": ds.n_rows(), "gamma": best.gamma, "cost": best.cost, "converged": fit.converged }),
        json!({ "cross_validated": cv.map(|(cm, m)| json!({ "confusion": cm, "metrics": m })) }),
    )?;
    Ok(SvmAnalysis { grid, artifact })
}
