use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::data::CategoricalData;
use super::{BayesError, Dag};
use crate::tabular::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDag {
    pub dag: Dag,
    pub total: f64,
    /// Family score per node, in node order.
    pub family_scores: Vec<f64>,
}

/// Mixed-radix parent configuration index of `row`; the last parent varies
/// fastest.
pub(crate) fn config_index(data: &CategoricalData, parents: &[usize], row: usize) -> u64 {
    parents
        .iter()
        .fold(0u64, |acc, &p| acc * data.arity(p) as u64 + data.columns[p][row] as u64)
}

/// BIC family score of `node` given `parents`.
pub(crate) fn family_score(data: &CategoricalData, node: usize, parents: &[usize]) -> f64 {
    let r = data.arity(node) as u64;
    let mut keys: Vec<u64> = (0..data.n)
        .map(|row| config_index(data, parents, row) * r + data.columns[node][row] as u64)
        .collect();
    keys.sort_unstable();

    let mut ll = 0.0;
    let mut i = 0;
    while i < keys.len() {
        let config = keys[i] / r;
        let start = i;
        let mut cells: Vec<f64> = Vec::new();
        while i < keys.len() && keys[i] / r == config {
            let k = keys[i];
            let s = i;
            while i < keys.len() && keys[i] == k {
                i += 1;
            }
            cells.push((i - s) as f64);
        }
        let n_ij = (i - start) as f64;
        for n_ijk in cells {
            ll += n_ijk * (n_ijk / n_ij).ln();
        }
    }
    let q: f64 = parents.iter().map(|&p| data.arity(p) as f64).product();
    ll - 0.5 * (data.n as f64).ln() * q * (r as f64 - 1.0)
}

/// Memoized family scores keyed by `(node, parent set)`.
pub(crate) struct ScoreCache<'a> {
    data: &'a CategoricalData,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> ScoreCache<'a> {
    pub fn new(data: &'a CategoricalData) -> Self {
        Self {
            data,
            cache: HashMap::new(),
        }
    }

    /// `parents` must be sorted.
    pub fn family(&mut self, node: usize, parents: &[usize]) -> f64 {
        debug_assert!(parents.windows(2).all(|w| w[0] < w[1]));
        if let Some(&s) = self.cache.get(&(node, parents.to_vec())) {
            return s;
        }
        let s = family_score(self.data, node, parents);
        self.cache.insert((node, parents.to_vec()), s);
        s
    }

    pub fn score_dag(&mut self, dag: &Dag) -> ScoredDag {
        let family_scores: Vec<f64> = (0..dag.len()).map(|i| self.family(i, dag.parents(i))).collect();
        ScoredDag {
            dag: dag.clone(),
            total: family_scores.iter().sum(),
            family_scores,
        }
    }
}

/// Columns of `ds` matching the DAG nodes, in node order.
pub(crate) fn data_for(dag: &Dag, ds: &Dataset) -> Result<CategoricalData, BayesError> {
    for n in dag.nodes() {
        if ds.schema().index_of(n).is_none() {
            return Err(BayesError::UnknownVariable(n.clone()));
        }
    }
    CategoricalData::from_dataset(&ds.select_columns(dag.nodes())?)
}

pub fn bic_score(dag: &Dag, ds: &Dataset) -> Result<ScoredDag, BayesError> {
    let data = data_for(dag, ds)?;
    if data.n == 0 {
        return Err(BayesError::NoRows);
    }
    Ok(ScoreCache::new(&data).score_dag(dag))
}
