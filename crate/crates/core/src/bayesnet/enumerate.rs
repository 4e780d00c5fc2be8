use super::data::CategoricalData;
use super::score::{ScoreCache, ScoredDag};
use super::search::SCORE_TOL;
use super::{BayesError, Dag};
use crate::tabular::Dataset;

pub const MAX_ENUMERATED_VARIABLES: usize = 4;

/// Every labeled DAG over `nodes`.
pub fn all_dags(nodes: &[String]) -> Vec<Dag> {
    let n = nodes.len();
    let others: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
    let per_node = 1usize << n.saturating_sub(1);
    let total = per_node.pow(n as u32);
    let mut out = Vec::new();
    'combos: for combo in 0..total {
        let mut dag = Dag::empty(nodes.iter().cloned()).expect("unique names");
        let mut rest = combo;
        for (child, cand) in others.iter().enumerate() {
            let mask = rest % per_node;
            rest /= per_node;
            for (bit, &p) in cand.iter().enumerate() {
                if mask >> bit & 1 == 1 && dag.add_edge(p, child).is_err() {
                    continue 'combos;
                }
            }
        }
        out.push(dag);
    }
    out
}

/// Exhaustive BIC maximum over all DAGs on the columns of `ds`. Ties go to
/// fewer edges, then the lexicographically smaller edge list.
pub fn enumerate_best_dag(ds: &Dataset) -> Result<ScoredDag, BayesError> {
    let data = CategoricalData::from_dataset(ds)?;
    let n = data.names.len();
    if n > MAX_ENUMERATED_VARIABLES {
        return Err(BayesError::TooManyVariables(n));
    }
    if n == 0 {
        return Err(BayesError::TooFewVariables(0));
    }
    if data.n == 0 {
        return Err(BayesError::NoRows);
    }
    let mut cache = ScoreCache::new(&data);
    let mut best: Option<ScoredDag> = None;
    for dag in all_dags(&data.names) {
        let s = cache.score_dag(&dag);
        let better = match &best {
            None => true,
            Some(b) if s.total > b.total + SCORE_TOL => true,
            Some(b) if s.total >= b.total - SCORE_TOL => {
                (s.dag.edge_count(), s.dag.edges()) < (b.dag.edge_count(), b.dag.edges())
            }
            _ => false,
        };
        if better {
            best = Some(s);
        }
    }
    Ok(best.expect("at least the empty DAG"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::test_support::dataset_from_codes;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn dag_counts() {
        assert_eq!(all_dags(&names(1)).len(), 1);
        assert_eq!(all_dags(&names(2)).len(), 3);
        assert_eq!(all_dags(&names(3)).len(), 25);
        assert_eq!(all_dags(&names(4)).len(), 543);
    }

    #[test]
    fn single_variable_and_guard() {
        let ds = dataset_from_codes(&["x"], &[2], &[vec![0], vec![1], vec![1]]);
        let s = enumerate_best_dag(&ds).unwrap();
        assert_eq!(s.dag.edge_count(), 0);
        assert_eq!(s.total, s.family_scores[0]);
        let rows: Vec<Vec<u32>> = (0..4).map(|i| vec![i % 2; 5]).collect();
        let wide = dataset_from_codes(&["a", "b", "c", "d", "e"], &[2; 5], &rows);
        assert!(matches!(
            enumerate_best_dag(&wide),
            Err(BayesError::TooManyVariables(5))
        ));
    }

    #[test]
    fn deterministic_copy_gets_an_edge() {
        let rows: Vec<Vec<u32>> = (0..1000).map(|i| vec![i % 2, i % 2, (i / 2) % 2]).collect();
        let ds = dataset_from_codes(&["x", "y", "z"], &[2, 2, 2], &rows);
        let s = enumerate_best_dag(&ds).unwrap();
        assert_eq!(s.dag.edges(), vec![(0, 1)]);
    }
}
