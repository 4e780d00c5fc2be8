use serde::{Deserialize, Serialize};

use super::score::{config_index, data_for};
use super::{BayesError, Dag};
use crate::tabular::Dataset;

const ROW_SUM_TOL: f64 = 1e-9;

/// DAG with one conditional probability table per node.
///
/// `cpts[i][j][k]` is P(node i = k | parent configuration j), where the
/// configuration index is mixed radix over `dag.parents(i)` with the last
/// parent varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct BayesNet {
    dag: Dag,
    categories: Vec<Vec<String>>,
    cpts: Vec<Vec<Vec<f64>>>,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNet {
    dag: Dag,
    categories: Vec<Vec<String>>,
    cpts: Vec<Vec<Vec<f64>>>,
    alpha: f64,
}

impl TryFrom<RawNet> for BayesNet {
    type Error = BayesError;

    fn try_from(r: RawNet) -> Result<Self, BayesError> {
        BayesNet::new(r.dag, r.categories, r.cpts, r.alpha)
    }
}

impl From<BayesNet> for RawNet {
    fn from(b: BayesNet) -> Self {
        RawNet {
            dag: b.dag,
            categories: b.categories,
            cpts: b.cpts,
            alpha: b.alpha,
        }
    }
}

impl BayesNet {
    pub fn new(
        dag: Dag,
        categories: Vec<Vec<String>>,
        cpts: Vec<Vec<Vec<f64>>>,
        alpha: f64,
    ) -> Result<Self, BayesError> {
        let invalid = |m: String| Err(BayesError::InvalidNetwork(m));
        if categories.len() != dag.len() || cpts.len() != dag.len() {
            return invalid("categories and tables must match the node count".into());
        }
        if categories.iter().any(|c| c.is_empty()) {
            return invalid("every node needs at least one category".into());
        }
        for (i, table) in cpts.iter().enumerate() {
            let q: usize = dag.parents(i).iter().map(|&p| categories[p].len()).product();
            let name = &dag.nodes()[i];
            if table.len() != q {
                return invalid(format!("`{name}` has {} rows, expected {q}", table.len()));
            }
            for row in table {
                if row.len() != categories[i].len() {
                    return invalid(format!("`{name}` has a row of width {}", row.len()));
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return invalid(format!("`{name}` has a negative or non-finite entry"));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL {
                    return invalid(format!("`{name}` has a row that does not sum to 1"));
                }
            }
        }
        Ok(Self {
            dag,
            categories,
            cpts,
            alpha,
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn categories(&self, node: usize) -> &[String] {
        &self.categories[node]
    }

    pub fn arity(&self, node: usize) -> usize {
        self.categories[node].len()
    }

    pub fn cpt(&self, node: usize) -> &[Vec<f64>] {
        &self.cpts[node]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn node_index(&self, name: &str) -> Result<usize, BayesError> {
        self.dag.require(name)
    }

    pub fn category_index(&self, node: usize, label: &str) -> Result<usize, BayesError> {
        self.categories[node]
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| BayesError::UnknownCategory {
                variable: self.dag.nodes()[node].clone(),
                value: label.to_string(),
            })
    }

    /// Row index of `node`'s CPT for a full assignment of state indices.
    pub fn config_of(&self, node: usize, assignment: &[usize]) -> usize {
        self.dag
            .parents(node)
            .iter()
            .fold(0, |acc, &p| acc * self.arity(p) + assignment[p])
    }

    /// Probability of a full assignment (one state index per node).
    pub fn joint_probability(&self, assignment: &[usize]) -> f64 {
        (0..self.dag.len())
            .map(|i| self.cpts[i][self.config_of(i, assignment)][assignment[i]])
            .product()
    }
}

/// Smoothed maximum-likelihood CPTs: (N_ijk + alpha) / (N_ij + alpha * r_i).
/// Parent configurations with no data get the uniform distribution.
pub fn fit_parameters(dag: &Dag, ds: &Dataset, alpha: f64) -> Result<BayesNet, BayesError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(BayesError::InvalidConfig(format!(
            "smoothing alpha must be >= 0, got {alpha}"
        )));
    }
    let data = data_for(dag, ds)?;
    let mut cpts = Vec::with_capacity(dag.len());
    for i in 0..dag.len() {
        let r = data.arity(i);
        let parents = dag.parents(i);
        let q: usize = parents.iter().map(|&p| data.arity(p)).product();
        let mut counts = vec![vec![0.0f64; r]; q];
        for row in 0..data.n {
            counts[config_index(&data, parents, row) as usize][data.columns[i][row] as usize] += 1.0;
        }
        let table = counts
            .into_iter()
            .map(|c| {
                let n_ij: f64 = c.iter().sum();
                let denom = n_ij + alpha * r as f64;
                if denom == 0.0 {
                    vec![1.0 / r as f64; r]
                } else {
                    c.iter().map(|n| (n + alpha) / denom).collect()
                }
            })
            .collect();
        cpts.push(table);
    }
    BayesNet::new(dag.clone(), data.categories, cpts, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::test_support::dataset_from_codes;

    fn six_four() -> Dataset {
        let rows: Vec<Vec<u32>> = (0..10).map(|i| vec![u32::from(i >= 6)]).collect();
        dataset_from_codes(&["x"], &[2], &rows)
    }

    #[test]
    fn mle_and_laplace() {
        let dag = Dag::empty(["x"]).unwrap();
        let mle = fit_parameters(&dag, &six_four(), 0.0).unwrap();
        assert_eq!(mle.cpt(0)[0], vec![0.6, 0.4]);
        let lap = fit_parameters(&dag, &six_four(), 1.0).unwrap();
        assert!((lap.cpt(0)[0][0] - 7.0 / 12.0).abs() < 1e-15);
        assert!((lap.cpt(0)[0][1] - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn unobserved_parent_configuration_is_uniform() {
        // parent p never takes state 2
        let rows: Vec<Vec<u32>> = (0..12).map(|i| vec![i % 2, i % 3]).collect();
        let ds = dataset_from_codes(&["p", "c"], &[3, 3], &rows);
        let dag = Dag::from_edges(["p", "c"], &[("p", "c")]).unwrap();
        for alpha in [0.0, 1.0] {
            let bn = fit_parameters(&dag, &ds, alpha).unwrap();
            assert_eq!(bn.cpt(1).len(), 3);
            for v in &bn.cpt(1)[2] {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn validation() {
        let dag = Dag::from_edges(["a", "b"], &[("a", "b")]).unwrap();
        let cats = vec![vec!["0".to_string(), "1".to_string()]; 2];
        let good = vec![vec![vec![0.3, 0.7]], vec![vec![0.8, 0.2], vec![0.4, 0.6]]];
        let bn = BayesNet::new(dag.clone(), cats.clone(), good, 1.0).unwrap();
        assert!((bn.joint_probability(&[1, 1]) - 0.42).abs() < 1e-15);
        let short = vec![vec![vec![0.3, 0.7]], vec![vec![0.8, 0.2]]];
        assert!(BayesNet::new(dag.clone(), cats.clone(), short, 1.0).is_err());
        let unnormalized = vec![vec![vec![0.3, 0.6]], vec![vec![0.8, 0.2], vec![0.4, 0.6]]];
        assert!(BayesNet::new(dag, cats, unnormalized, 1.0).is_err());
        assert!(fit_parameters(&Dag::empty(["x"]).unwrap(), &six_four(), -1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let bn = fit_parameters(&Dag::empty(["x"]).unwrap(), &six_four(), 1.0).unwrap();
        let s = serde_json::to_string(&bn).unwrap();
        let back: BayesNet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, bn);
    }
}
