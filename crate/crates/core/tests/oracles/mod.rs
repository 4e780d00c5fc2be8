//! Independent reference implementations and random instance generators
//! shared by the oracle and acceptance suites.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use caselab_core::bayesnet::{BayesNet, Dag};
use caselab_core::matrix::Matrix;
use caselab_core::tabular::{ColumnSpec, Dataset};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------- numerical integration ----------

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // split first so narrow features are not skipped
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, 1e-14, 40)
        })
        .sum()
}

/// Two-sided Student t tail, integrating the unnormalized density under
/// x = tan(theta).
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    let g = |th: f64| {
        let (s, c) = th.sin_cos();
        (c * c + s * s / df).powf(-(df + 1.0) / 2.0) * c.max(0.0).powf(df - 1.0)
    };
    let th0 = t.abs().atan();
    integrate(g, th0, FRAC_PI_2) / integrate(g, 0.0, FRAC_PI_2)
}

/// Upper F tail through the beta form under u = sin^2(phi).
pub fn f_upper(f: f64, d1: f64, d2: f64) -> f64 {
    let (a, b) = (d1 / 2.0, d2 / 2.0);
    let g = |phi: f64| {
        let (s, c) = phi.sin_cos();
        s.max(0.0).powf(2.0 * a - 1.0) * c.max(0.0).powf(2.0 * b - 1.0)
    };
    let u0 = d1 * f / (d1 * f + d2);
    let phi0 = u0.sqrt().asin();
    integrate(g, phi0, FRAC_PI_2) / integrate(g, 0.0, FRAC_PI_2)
}

/// Upper chi-square tail under x = s^2.
pub fn chi_square_upper(x: f64, k: f64) -> f64 {
    let g = |s: f64| s.powf(k - 1.0) * (-s * s / 2.0).exp();
    let s0 = x.sqrt();
    let end = 12.0 + (k + 1.0).sqrt() * 4.0 + s0;
    integrate(g, s0, end) / integrate(g, 0.0, end)
}

/// 50 (statistic, df) points per distribution.
pub fn t_grid() -> Vec<(f64, f64)> {
    let ts = [0.05, 0.3, 0.7, 1.2, 2.0, 3.0, 4.5, 6.0, 9.0, 15.0];
    let dfs = [1.0, 2.0, 4.0, 9.0, 30.0];
    ts.iter().flat_map(|&t| dfs.iter().map(move |&d| (t, d))).collect()
}

pub fn f_grid() -> Vec<(f64, f64, f64)> {
    let fs = [0.1, 0.5, 0.9, 1.5, 2.5, 4.0, 6.0, 10.0, 20.0, 50.0];
    let dfs = [(1.0, 1.0), (1.0, 10.0), (2.0, 5.0), (4.0, 20.0), (10.0, 3.0)];
    fs.iter()
        .flat_map(|&f| dfs.iter().map(move |&(a, b)| (f, a, b)))
        .collect()
}

pub fn chi_square_grid() -> Vec<(f64, f64)> {
    let xs = [0.01, 0.3, 1.0, 2.0, 4.0, 7.0, 10.0, 15.0, 25.0, 40.0];
    let ks = [1.0, 2.0, 3.0, 6.0, 12.0];
    xs.iter().flat_map(|&x| ks.iter().map(move |&k| (x, k))).collect()
}

// ---------- Bayesian networks ----------

/// Binary network on `n` nodes with edges along a random order.
pub fn random_binary_network<R: Rng>(rng: &mut R, n: usize) -> BayesNet {
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut dag = Dag::empty(names.clone()).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.5) {
                dag.add_edge(order[i], order[j]).unwrap();
            }
        }
    }
    let cpts = (0..n)
        .map(|v| {
            (0..1usize << dag.parents(v).len())
                .map(|_| {
                    let p: f64 = rng.gen_range(0.05..0.95);
                    vec![p, 1.0 - p]
                })
                .collect()
        })
        .collect();
    let categories = vec![vec!["0".to_string(), "1".to_string()]; n];
    BayesNet::new(dag, categories, cpts, 1.0).unwrap()
}

/// Posterior of `target` by summing the full joint table.
pub fn brute_force_posterior(bn: &BayesNet, evidence: &[(usize, usize)], target: usize) -> Vec<f64> {
    let dag = bn.dag();
    let n = dag.len();
    let arity: Vec<usize> = (0..n).map(|v| bn.arity(v)).collect();
    let total: usize = arity.iter().product();
    let mut out = vec![0.0; arity[target]];
    let mut x = vec![0usize; n];
    for mut idx in 0..total {
        for v in 0..n {
            x[v] = idx % arity[v];
            idx /= arity[v];
        }
        if evidence.iter().any(|&(v, s)| x[v] != s) {
            continue;
        }
        let mut p = 1.0;
        for v in 0..n {
            let mut cfg = 0;
            for &q in dag.parents(v) {
                cfg = cfg * arity[q] + x[q];
            }
            p *= bn.cpt(v)[cfg][x[v]];
        }
        out[x[target]] += p;
    }
    let z: f64 = out.iter().sum();
    out.iter().map(|p| p / z).collect()
}

/// Samples `rows` rows of category codes from `bn`.
pub fn sample_codes<R: Rng>(rng: &mut R, bn: &BayesNet, rows: usize) -> Vec<Vec<u32>> {
    let dag = bn.dag();
    let order = dag.topological_order();
    (0..rows)
        .map(|_| {
            let mut x = vec![0u32; dag.len()];
            for &v in &order {
                let mut cfg = 0;
                for &q in dag.parents(v) {
                    cfg = cfg * bn.arity(q) + x[q] as usize;
                }
                let row = &bn.cpt(v)[cfg];
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                x[v] = (row.len() - 1) as u32;
                for (k, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        x[v] = k as u32;
                        break;
                    }
                }
            }
            x
        })
        .collect()
}

/// Three-variable dataset sampled from a random network with arities 2 or 3.
pub fn random_three_variable_dataset<R: Rng>(rng: &mut R) -> Dataset {
    let names = ["A", "B", "C"];
    let arity: Vec<usize> = (0..3).map(|_| rng.gen_range(2..=3)).collect();
    let mut order = [0usize, 1, 2];
    order.shuffle(rng);
    let mut dag = Dag::empty(names).unwrap();
    for i in 0..3 {
        for j in i + 1..3 {
            if rng.gen_bool(0.5) {
                dag.add_edge(order[i], order[j]).unwrap();
            }
        }
    }
    let cpts: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|v| {
            let configs: usize = dag.parents(v).iter().map(|&p| arity[p]).product();
            (0..configs)
                .map(|_| {
                    let w: Vec<f64> = (0..arity[v]).map(|_| rng.gen_range(0.1..1.0f64).powi(2)).collect();
                    let s: f64 = w.iter().sum();
                    w.iter().map(|x| x / s).collect()
                })
                .collect()
        })
        .collect();
    let categories: Vec<Vec<String>> = arity.iter().map(|&a| (0..a).map(|k| k.to_string()).collect()).collect();
    let bn = BayesNet::new(dag, categories.clone(), cpts, 1.0).unwrap();
    let n_rows = rng.gen_range(500..=5000);
    let rows = sample_codes(rng, &bn, n_rows);
    let specs = names
        .iter()
        .zip(&categories)
        .map(|(n, c)| ColumnSpec::categorical(*n, c.iter().cloned()))
        .collect();
    Dataset::from_codes(specs, &rows).unwrap()
}

// ---------- SVM dual ----------

fn kernel_matrix(x: &Matrix, y: &[i8], gamma: f64) -> Vec<Vec<f64>> {
    let n = x.rows();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d2: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    f64::from(y[i]) * f64::from(y[j]) * (-gamma * d2).exp()
                })
                .collect()
        })
        .collect()
}

/// Euclidean projection onto {0 <= a <= c, y.a = 0}. The constraint sum
/// is piecewise linear in the hyperplane multiplier, so it is solved exactly
/// between consecutive breakpoints.
fn project(v: &[f64], y: &[i8], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, &yi)| (vi - lam * f64::from(yi)).clamp(0.0, c))
            .collect()
    };
    let h = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, &yi)| a * f64::from(yi)).sum() };
    let mut knots: Vec<f64> = v
        .iter()
        .zip(y)
        .flat_map(|(vi, &yi)| [vi / f64::from(yi), (vi - c) / f64::from(yi)])
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let values: Vec<f64> = knots.iter().map(|&k| h(k)).collect();
    // h is non-increasing in lambda
    for w in 0..knots.len().saturating_sub(1) {
        let (h0, h1) = (values[w], values[w + 1]);
        if h0 >= 0.0 && h1 <= 0.0 {
            let lam = if h0 == h1 {
                knots[w]
            } else {
                knots[w] + (knots[w + 1] - knots[w]) * h0 / (h0 - h1)
            };
            return at(lam);
        }
    }
    at(if values.first().is_some_and(|&h0| h0 <= 0.0) {
        knots[0]
    } else {
        *knots.last().unwrap()
    })
}

/// Maximum of sum(a) - a'Qa/2 over the SVM dual feasible set by
/// accelerated projected gradient with adaptive restart.
pub fn dual_optimum(x: &Matrix, y: &[i8], c: f64, gamma: f64) -> f64 {
    let q = kernel_matrix(x, y, gamma);
    let n = y.len();
    let lipschitz = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let objective = |a: &[f64]| -> f64 {
        let quad: f64 = (0..n).map(|i| a[i] * (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = objective(&a);
    for _ in 0..20_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| q[i][j] * z[j]).sum::<f64>() - 1.0)
            .collect();
        let cand: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi - step * g).collect();
        let next = project(&cand, y, c);
        let f = objective(&next);
        if f < best {
            // restart momentum
            t = 1.0;
            z = a.clone();
            continue;
        }
        let moved = next.iter().zip(&a).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        best = f;
        if moved < 1e-12 {
            break;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next
            .iter()
            .zip(&a)
            .map(|(n1, a0)| n1 + (t - 1.0) / t_next * (n1 - a0))
            .collect();
        a = next;
        t = t_next;
    }
    best
}

/// Small two-class dataset in the plane.
pub fn random_svm_dataset<R: Rng>(rng: &mut R, n: usize) -> (Matrix, Vec<i8>) {
    loop {
        let rows: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let y: Vec<i8> = rows
            .iter()
            .map(|r| {
                if r[0] + 0.5 * r[1] + rng.gen_range(-0.8..0.8) > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        if y.iter().any(|&v| v > 0) && y.iter().any(|&v| v < 0) {
            return (Matrix::from_rows(&rows).unwrap(), y);
        }
    }
}
