use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{DirectRbf, SquaredDistances, SubsetRbf};
use super::metrics::{metrics, ConfusionMatrix};
use super::smo::{budget, check_parameters, class_costs, solve, validate_labels, SmoConfig, Solution};
use super::SvmError;
use crate::matrix::{squared_distance, Matrix};

/// Above this many rows the pairwise distance table is not precomputed.
const DISTANCE_TABLE_MAX_ROWS: usize = 6000;

/// Fold index per row. Each class is shuffled and dealt round-robin, the
/// deal continuing from where the previous class stopped.
pub fn stratified_folds(y: &[i8], k: usize, seed: u64) -> Result<Vec<usize>, SvmError> {
    if k < 2 {
        return Err(SvmError::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; y.len()];
    let mut next = 0;
    for class in [-1i8, 1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < k {
            return Err(SvmError::ClassTooSmall {
                class,
                size: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub gammas: Vec<f64>,
    pub costs: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            gammas: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            costs: vec![0.1, 1.0, 10.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub gamma: f64,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specificity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youden: Option<f64>,
    /// Every fold reached the stopping tolerance.
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Row-major over `gammas` x `costs`.
    pub cells: Vec<GridCell>,
    pub best_cell: usize,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<usize>,
}

impl GridResult {
    pub fn best(&self) -> &GridCell {
        &self.cells[self.best_cell]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,cost,tp,fp,tn,fn,sensitivity,specificity,youden\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let [tp, fp, tn, fn_] = c
                .confusion
                .map(|m| [m.tp, m.fp, m.tn, m.fn_].map(|v| v.to_string()))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{tp},{fp},{tn},{fn_},{},{},{}",
                c.gamma,
                c.cost,
                opt(c.sensitivity),
                opt(c.specificity),
                opt(c.youden)
            )
            .unwrap();
        }
        out
    }
}

struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn decision(sol: &Solution, train: &[usize], y: &[i8], gamma: f64, dist: impl Fn(usize) -> f64) -> f64 {
    let mut f = sol.bias;
    for (pos, &row) in train.iter().enumerate() {
        let a = sol.alpha[pos];
        if a > 0.0 {
            f += a * y[row] as f64 * (-gamma * dist(row)).exp();
        }
    }
    f
}

fn evaluate_cell(
    x: &Matrix,
    y: &[i8],
    table: Option<&SquaredDistances>,
    folds: &[Fold],
    gamma: f64,
    cost: f64,
    config: &SmoConfig,
) -> Result<(ConfusionMatrix, bool), SvmError> {
    check_parameters(cost, gamma, config)?;
    let mut cm = ConfusionMatrix::default();
    let mut converged = true;
    for fold in folds {
        let ty: Vec<i8> = fold.train.iter().map(|&i| y[i]).collect();
        let costs = class_costs(&ty, cost, &config.class_weights)?;
        let limit = budget(config, ty.len());
        match table {
            Some(d2) => {
                let kernel = SubsetRbf {
                    d2,
                    rows: &fold.train,
                    gamma,
                };
                let sol = solve(&kernel, &ty, costs, config.tol, limit, config.seed);
                converged &= sol.converged;
                for &t in &fold.test {
                    let f = decision(&sol, &fold.train, y, gamma, |r| d2.get(r, t));
                    cm.record(y[t] > 0, f > 0.0);
                }
            }
            None => {
                let tx = x.select_rows(&fold.train);
                let kernel = DirectRbf { x: &tx, gamma };
                let sol = solve(&kernel, &ty, costs, config.tol, limit, config.seed);
                converged &= sol.converged;
                for &t in &fold.test {
                    let f = decision(&sol, &fold.train, y, gamma, |r| squared_distance(x.row(r), x.row(t)));
                    cm.record(y[t] > 0, f > 0.0);
                }
            }
        }
    }
    Ok((cm, converged))
}

/// k-fold cross-validated scan of every (gamma, cost) pair on shared folds.
/// The best cell maximizes Youden's index, then sensitivity, then prefers
/// lower cost and lower gamma.
pub fn grid_search(
    x: &Matrix,
    y: &[i8],
    grid: &Grid,
    k: usize,
    seed: u64,
    config: &SmoConfig,
) -> Result<GridResult, SvmError> {
    if x.rows() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if grid.gammas.is_empty() || grid.costs.is_empty() {
        return Err(SvmError::EmptyGrid);
    }
    validate_labels(y)?;
    if !x.is_finite() {
        return Err(SvmError::NonFinite);
    }
    let assignment = stratified_folds(y, k, seed)?;
    let folds: Vec<Fold> = (0..k)
        .map(|f| Fold {
            train: (0..y.len()).filter(|&i| assignment[i] != f).collect(),
            test: (0..y.len()).filter(|&i| assignment[i] == f).collect(),
        })
        .collect();
    let table = (x.rows() <= DISTANCE_TABLE_MAX_ROWS).then(|| SquaredDistances::new(x));

    let pairs: Vec<(f64, f64)> = grid
        .gammas
        .iter()
        .flat_map(|&g| grid.costs.iter().map(move |&c| (g, c)))
        .collect();
    let cells: Vec<GridCell> = pairs
        .par_iter()
        .map(|&(gamma, cost)| {
            let outcome = evaluate_cell(x, y, table.as_ref(), &folds, gamma, cost, config)
                .and_then(|(cm, conv)| metrics(&cm).map(|m| (cm, conv, m)));
            match outcome {
                Ok((cm, converged, m)) => GridCell {
                    gamma,
                    cost,
                    confusion: Some(cm),
                    sensitivity: Some(m.sensitivity),
                    specificity: Some(m.specificity),
                    youden: Some(m.youden),
                    converged,
                    error: None,
                },
                Err(e) => GridCell {
                    gamma,
                    cost,
                    confusion: None,
                    sensitivity: None,
                    specificity: None,
                    youden: None,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let best_cell = (0..cells.len())
        .filter(|&i| cells[i].youden.is_some())
        .reduce(|a, b| if better(&cells[b], &cells[a]) { b } else { a })
        .ok_or(SvmError::AllCellsFailed)?;
    Ok(GridResult {
        cells,
        best_cell,
        k,
        seed,
        folds: assignment,
    })
}

fn better(a: &GridCell, b: &GridCell) -> bool {
    let ka = (a.youden.unwrap(), a.sensitivity.unwrap(), -a.cost, -a.gamma);
    let kb = (b.youden.unwrap(), b.sensitivity.unwrap(), -b.cost, -b.gamma);
    ka.partial_cmp(&kb) == Some(std::cmp::Ordering::Greater)
}
