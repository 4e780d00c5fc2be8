use crate::matrix::{squared_distance, Matrix};

use super::SvmError;

/// exp(-gamma * |x - y|^2).
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SvmError::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok((-gamma * squared_distance(x, y)).exp())
}

/// Symmetric matrix of pairwise squared distances, upper triangle stored.
pub(crate) struct SquaredDistances {
    n: usize,
    tri: Vec<f64>,
}

impl SquaredDistances {
    pub fn new(x: &Matrix) -> Self {
        let n = x.rows();
        let mut tri = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                tri.push(squared_distance(x.row(i), x.row(j)));
            }
        }
        Self { n, tri }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        // row a starts after rows of length n, n-1, ..., n-a+1
        let offset = a * self.n - a * a.saturating_sub(1) / 2;
        self.tri[offset + b - a]
    }
}

/// Kernel values between rows of a training set, on demand.
pub(crate) trait KernelRows: Sync {
    fn len(&self) -> usize;
    fn eval(&self, i: usize, j: usize) -> f64;

    fn row(&self, i: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.eval(i, j);
        }
    }
}

pub(crate) struct DirectRbf<'a> {
    pub x: &'a Matrix,
    pub gamma: f64,
}

impl KernelRows for DirectRbf<'_> {
    fn len(&self) -> usize {
        self.x.rows()
    }

    fn eval(&self, i: usize, j: usize) -> f64 {
        (-self.gamma * squared_distance(self.x.row(i), self.x.row(j))).exp()
    }
}

/// Kernel over a subset of rows of a precomputed distance table.
pub(crate) struct SubsetRbf<'a> {
    pub d2: &'a SquaredDistances,
    pub rows: &'a [usize],
    pub gamma: f64,
}

impl KernelRows for SubsetRbf<'_> {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn eval(&self, i: usize, j: usize) -> f64 {
        (-self.gamma * self.d2.get(self.rows[i], self.rows[j])).exp()
    }
}
