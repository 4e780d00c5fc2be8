use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{DirectRbf, KernelRows};
use super::model::SvmModel;
use super::SvmError;
use crate::matrix::Matrix;

const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ClassWeights {
    /// Both classes use `cost`.
    None,
    /// Each class weighted by n / (2 * n_class).
    InversePrevalence,
    Manual {
        negative: f64,
        positive: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoConfig {
    /// Stop once the maximal KKT violation gap falls below this.
    pub tol: f64,
    /// Budget of pair updates, in multiples of the training-set size.
    pub max_passes: usize,
    pub class_weights: ClassWeights,
    /// Orders the candidate scan, which decides ties in pair selection.
    pub seed: u64,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_passes: 10_000,
            class_weights: ClassWeights::None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoFit {
    pub model: SvmModel,
    /// Dual variables for every training row.
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Kernel rows with a bounded FIFO cache.
struct RowCache<'a, K: KernelRows> {
    kernel: &'a K,
    rows: Vec<Option<Box<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a, K: KernelRows> RowCache<'a, K> {
    fn new(kernel: &'a K) -> Self {
        let n = kernel.len();
        Self {
            kernel,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity: (CACHE_BYTES / (8 * n.max(1))).max(2),
        }
    }

    /// Ensures row `i` is cached without evicting row `keep`.
    fn load_keeping(&mut self, i: usize, keep: usize) {
        if self.rows[i].is_some() {
            return;
        }
        if self.order.len() >= self.capacity {
            let mut old = self.order.pop_front().expect("non-empty");
            if old == keep {
                self.order.push_back(old);
                old = self.order.pop_front().expect("capacity of at least two");
            }
            self.rows[old] = None;
        }
        let mut r = vec![0.0; self.kernel.len()].into_boxed_slice();
        self.kernel.row(i, &mut r);
        self.rows[i] = Some(r);
        self.order.push_back(i);
    }

    fn load(&mut self, i: usize) {
        self.load_keeping(i, i);
    }

    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.load(i);
        self.load_keeping(j, i);
        (self.rows[i].as_deref().unwrap(), self.rows[j].as_deref().unwrap())
    }
}

pub(crate) fn class_costs(y: &[i8], cost: f64, weights: &ClassWeights) -> Result<[f64; 2], SvmError> {
    let [wn, wp] = match weights {
        ClassWeights::None => [1.0, 1.0],
        ClassWeights::InversePrevalence => {
            let pos = y.iter().filter(|&&v| v > 0).count() as f64;
            let n = y.len() as f64;
            [n / (2.0 * (n - pos)), n / (2.0 * pos)]
        }
        ClassWeights::Manual { negative, positive } => [*negative, *positive],
    };
    if !(wn > 0.0 && wp > 0.0 && wn.is_finite() && wp.is_finite()) {
        return Err(SvmError::InvalidParameter("class weights must be positive".into()));
    }
    Ok([cost * wn, cost * wp])
}

pub(crate) fn validate_labels(y: &[i8]) -> Result<(), SvmError> {
    if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(SvmError::BadLabel(*bad));
    }
    let pos = y.iter().filter(|&&v| v > 0).count();
    if pos == 0 || pos == y.len() {
        return Err(SvmError::SingleClass);
    }
    Ok(())
}

/// Soft-margin dual by SMO with second-order working-set selection:
/// minimize 0.5 a'Qa - e'a subject to y'a = 0 and 0 <= a_i <= C_{y_i}.
pub(crate) fn solve<K: KernelRows>(
    kernel: &K,
    y: &[i8],
    costs: [f64; 2],
    tol: f64,
    budget: usize,
    seed: u64,
) -> Solution {
    let n = y.len();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let c: Vec<f64> = y.iter().map(|&v| if v > 0 { costs[1] } else { costs[0] }).collect();
    let diag: Vec<f64> = (0..n).map(|i| kernel.eval(i, i)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cache = RowCache::new(kernel);

    let up = |a: f64, t: usize, yt: f64| (yt > 0.0 && a < c[t]) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, t: usize, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c[t]);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        // i: maximal violator in I_up
        let mut g_max = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for &t in &order {
            if up(alpha[t], t, yf[t]) {
                let v = -yf[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i = t;
                }
            }
        }
        let mut g_min = f64::INFINITY;
        for &t in &order {
            if low(alpha[t], t, yf[t]) {
                g_min = g_min.min(-yf[t] * grad[t]);
            }
        }
        if i == usize::MAX || g_max - g_min < tol {
            converged = true;
            break;
        }
        cache.load(i);
        let ki = cache.rows[i].as_deref().unwrap();
        // j: largest second-order decrease among I_low violators
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for &t in &order {
            if !low(alpha[t], t, yf[t]) {
                continue;
            }
            let b = g_max + yf[t] * grad[t];
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (ki, kj) = cache.pair(i, j);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        let mut quad = diag[i] + diag[j] - 2.0 * ki[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (ai_old, aj_old);
        if yf[i] != yf[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - ai_old, aj - aj_old);
        for t in 0..n {
            grad[t] += yf[t] * (yf[i] * ki[t] * di + yf[j] * kj[t] * dj);
        }
    }

    // rho from free vectors, else midpoint of the feasible interval
    let mut sum = 0.0;
    let mut free = 0usize;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = yf[t] * grad[t];
        let at_upper = alpha[t] >= c[t];
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if yf[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if yf[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { 0.5 * (ub + lb) };
    Solution {
        alpha,
        bias: -rho,
        iterations,
        converged,
    }
}

/// Trains an RBF soft-margin SVM. `y` holds -1 / +1.
pub fn train_smo(x: &Matrix, y: &[i8], cost: f64, gamma: f64, config: &SmoConfig) -> Result<SmoFit, SvmError> {
    if x.rows() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.rows() < 2 {
        return Err(SvmError::SingleClass);
    }
    validate_labels(y)?;
    check_parameters(cost, gamma, config)?;
    if !x.is_finite() {
        return Err(SvmError::NonFinite);
    }
    let costs = class_costs(y, cost, &config.class_weights)?;
    let kernel = DirectRbf { x, gamma };
    let sol = solve(&kernel, y, costs, config.tol, budget(config, y.len()), config.seed);
    let model = SvmModel::from_solution(x, y, &sol.alpha, sol.bias, gamma, cost);
    Ok(SmoFit {
        model,
        alpha: sol.alpha,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

pub(crate) fn budget(config: &SmoConfig, n: usize) -> usize {
    config.max_passes.saturating_mul(n.max(1))
}

pub(crate) fn check_parameters(cost: f64, gamma: f64, config: &SmoConfig) -> Result<(), SvmError> {
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(SvmError::InvalidParameter(format!("cost must be positive, got {cost}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SvmError::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(SvmError::InvalidParameter("tol must be positive".into()));
    }
    Ok(())
}

/// Dual objective sum(a) - 0.5 sum_ij a_i a_j y_i y_j K_ij (to be maximized).
pub fn dual_objective(x: &Matrix, y: &[i8], alpha: &[f64], gamma: f64) -> f64 {
    let k = DirectRbf { x, gamma };
    let mut quad = 0.0;
    for i in 0..y.len() {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..y.len() {
            quad += alpha[i] * alpha[j] * (y[i] * y[j]) as f64 * k.eval(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Largest violation of the KKT conditions in functional-margin units.
pub fn max_kkt_violation(fit: &SmoFit, x: &Matrix, y: &[i8], config: &SmoConfig) -> f64 {
    let costs = class_costs(y, fit.model.cost(), &config.class_weights).expect("weights validated at training");
    let mut worst: f64 = 0.0;
    for (i, (&label, &a)) in y.iter().zip(&fit.alpha).enumerate() {
        let c = if label > 0 { costs[1] } else { costs[0] };
        let margin = label as f64 * fit.model.decision_value(x.row(i)).expect("training dimension");
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Matrix, Vec<i8>) {
        (
            Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap(),
            vec![1, 1, -1, -1],
        )
    }

    #[test]
    fn two_point_symmetry() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let fit = train_smo(&x, &[-1, 1], 10.0, 1.0, &SmoConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.model.decision_value(&[0.0]).unwrap().abs() < 1e-6);
        assert!(fit.model.predict(&[1.0]).unwrap().positive);
        assert!(!fit.model.predict(&[-1.0]).unwrap().positive);
        assert!(fit.model.predict(&[4.0]).unwrap().positive);
    }

    #[test]
    fn xor_is_separated() {
        let (x, y) = xor();
        let cfg = SmoConfig::default();
        let fit = train_smo(&x, &y, 10.0, 1.0, &cfg).unwrap();
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(fit.model.predict(x.row(i)).unwrap().positive, label > 0);
        }
        assert!(max_kkt_violation(&fit, &x, &y, &cfg) <= 1e-3);
        let balance: f64 = fit.alpha.iter().zip(&y).map(|(a, &l)| a * l as f64).sum();
        assert!(balance.abs() < 1e-6);
    }

    #[test]
    fn input_errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let cfg = SmoConfig::default();
        assert!(matches!(
            train_smo(&x, &[1, 1], 1.0, 1.0, &cfg),
            Err(SvmError::SingleClass)
        ));
        assert!(matches!(
            train_smo(&x, &[1, 0], 1.0, 1.0, &cfg),
            Err(SvmError::BadLabel(0))
        ));
        assert!(matches!(
            train_smo(&x, &[1, -1], 0.0, 1.0, &cfg),
            Err(SvmError::InvalidParameter(_))
        ));
        let bad = Matrix::from_rows(&[[f64::INFINITY], [1.0]]).unwrap();
        assert!(matches!(
            train_smo(&bad, &[1, -1], 1.0, 1.0, &cfg),
            Err(SvmError::NonFinite)
        ));
    }

    #[test]
    fn class_weights_scale_box() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2], [1.0]]).unwrap();
        let y = [-1, -1, 1, -1];
        let cfg = SmoConfig {
            class_weights: ClassWeights::InversePrevalence,
            ..SmoConfig::default()
        };
        let fit = train_smo(&x, &y, 1.0, 1.0, &cfg).unwrap();
        let costs = class_costs(&y, 1.0, &cfg.class_weights).unwrap();
        assert_eq!(costs, [4.0 / 6.0, 2.0]);
        for (a, &l) in fit.alpha.iter().zip(&y) {
            assert!(*a >= 0.0 && *a <= if l > 0 { costs[1] } else { costs[0] } + 1e-12);
        }
    }
}
