//! k-means with k-means++ seeding, and the mean silhouette.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{squared_distance, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of rows ({n})")]
    TooManyClusters { k: usize, n: usize },
    #[error("matrix has no columns")]
    NoColumns,
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("silhouette needs at least two clusters, got {0}")]
    TooFewClusters(usize),
    #[error("assignment covers {assigned} rows but the matrix has {rows}")]
    ShapeMismatch { assigned: usize, rows: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// `row,cluster` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,cluster\n");
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }
}

fn plus_plus_seeds(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.rows();
    let mut seeds = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(x.row(i), x.row(seeds[0]))).collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            // Remaining points coincide with chosen seeds; take unused rows.
            (0..n).find(|i| !seeds.contains(i)).expect("k <= n")
        };
        seeds.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(x.row(i), x.row(next)));
        }
    }
    seeds
}

fn assign(x: &Matrix, centroids: &Matrix, labels: &mut [usize]) -> (f64, bool) {
    let mut changed = false;
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let row = x.row(i);
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for c in 0..centroids.rows() {
            let d = squared_distance(row, centroids.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        if *label != best {
            *label = best;
            changed = true;
        }
        inertia += best_d;
    }
    (inertia, changed)
}

fn update(x: &Matrix, labels: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut c = Matrix::zeros(k, x.cols());
    let mut sizes = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        sizes[l] += 1;
        for (acc, v) in c.row_mut(l).iter_mut().zip(x.row(i)) {
            *acc += v;
        }
    }
    for (j, &s) in sizes.iter().enumerate() {
        if s > 0 {
            for v in c.row_mut(j) {
                *v /= s as f64;
            }
        }
    }
    (c, sizes)
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(x: &Matrix, labels: &mut [usize], centroids: &mut Matrix, sizes: &mut [usize]) {
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let far = (0..x.rows())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = squared_distance(x.row(a), centroids.row(labels[a]));
                let db = squared_distance(x.row(b), centroids.row(labels[b]));
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= n leaves a donor cluster");
        sizes[labels[far]] -= 1;
        sizes[empty] = 1;
        labels[far] = empty;
        let (c, s) = update(x, labels, centroids.rows());
        *centroids = c;
        sizes.copy_from_slice(&s);
    }
}

pub fn k_means(x: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment, ClusterError> {
    let n = x.rows();
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    if x.cols() == 0 {
        return Err(ClusterError::NoColumns);
    }
    if !x.is_finite() {
        return Err(ClusterError::NonFinite);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = x.select_rows(&plus_plus_seeds(x, k, &mut rng));
    let mut labels = vec![usize::MAX; n];
    let (mut inertia, _) = assign(x, &centroids, &mut labels);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let (c, mut sizes) = update(x, &labels, k);
        centroids = c;
        repair_empty(x, &mut labels, &mut centroids, &mut sizes);
        let (next, changed) = assign(x, &centroids, &mut labels);
        debug_assert!(
            next <= inertia * (1.0 + 1e-12) + 1e-12,
            "inertia rose from {inertia} to {next}"
        );
        inertia = next;
        if !changed {
            break;
        }
    }
    let (c, mut sizes) = update(x, &labels, k);
    centroids = c;
    repair_empty(x, &mut labels, &mut centroids, &mut sizes);
    let inertia_final = (0..n)
        .map(|i| squared_distance(x.row(i), centroids.row(labels[i])))
        .sum();
    Ok(ClusterAssignment {
        k,
        labels,
        centroids,
        inertia: inertia_final,
        iterations,
    })
}

/// Mean silhouette width. Points alone in their cluster score 0.
pub fn silhouette(x: &Matrix, labels: &[usize]) -> Result<f64, ClusterError> {
    if labels.len() != x.rows() {
        return Err(ClusterError::ShapeMismatch {
            assigned: labels.len(),
            rows: x.rows(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let used = sizes.iter().filter(|&&s| s > 0).count();
    if used < 2 {
        return Err(ClusterError::TooFewClusters(used));
    }
    let n = x.rows();
    let mut total = 0.0;
    for i in 0..n {
        if sizes[labels[i]] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += squared_distance(x.row(i), x.row(j)).sqrt();
            }
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}
