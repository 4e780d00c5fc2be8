use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::tabular::{ColumnValues, Dataset};

/// Type-7 quantile of already sorted data: linear interpolation between the
/// order statistics at position `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSummary {
    pub n: usize,
    pub n_missing: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    /// Set when `n == 1` and `sd` is a placeholder.
    pub singleton: bool,
}

impl ContinuousSummary {
    pub fn from_values(values: &[f64]) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            n,
            n_missing: 0,
            min: sorted[0],
            max: sorted[n - 1],
            mean,
            median: quantile_sorted(&sorted, 0.5),
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
            sd,
            singleton: n == 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub label: String,
    pub count: usize,
    /// Percentage of non-missing cells.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSummary {
    pub n: usize,
    pub n_missing: usize,
    pub categories: Vec<CategoryCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Summary {
    Continuous(ContinuousSummary),
    Categorical(CategoricalSummary),
}

/// Summary of one column over its non-missing cells.
pub fn describe(ds: &Dataset, column: &str) -> Result<Summary, StatsError> {
    let (spec, col) = ds
        .column(column)
        .ok_or_else(|| StatsError::UnknownColumn(column.to_string()))?;
    match col.values() {
        ColumnValues::Continuous(v) => {
            let xs: Vec<f64> = v.iter().flatten().copied().collect();
            if xs.is_empty() {
                return Err(StatsError::EmptyColumn(column.to_string()));
            }
            let mut s = ContinuousSummary::from_values(&xs)?;
            s.n_missing = ds.n_rows() - s.n;
            Ok(Summary::Continuous(s))
        }
        ColumnValues::Categorical(codes) => {
            let mut counts = vec![0usize; spec.arity()];
            for c in codes.iter().flatten() {
                counts[*c as usize] += 1;
            }
            let n: usize = counts.iter().sum();
            if n == 0 {
                return Err(StatsError::EmptyColumn(column.to_string()));
            }
            let categories = spec
                .category_labels()
                .iter()
                .zip(counts)
                .map(|(label, count)| CategoryCount {
                    label: label.clone(),
                    count,
                    percent: 100.0 * count as f64 / n as f64,
                })
                .collect();
            Ok(Summary::Categorical(CategoricalSummary {
                n,
                n_missing: ds.n_rows() - n,
                categories,
            }))
        }
    }
}

/// Renders summaries as an aligned `N (%)` table for the listed columns.
pub fn render_frequency_table(ds: &Dataset, columns: &[&str]) -> Result<String, StatsError> {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "Description of the population (n = {})", ds.n_rows()).unwrap();
    for &c in columns {
        match describe(ds, c)? {
            Summary::Categorical(s) => {
                for (i, cat) in s.categories.iter().enumerate() {
                    let name = if i == 0 { c } else { "" };
                    writeln!(out, "{name:<28}{:<32}{} ({:.1})", cat.label, cat.count, cat.percent).unwrap();
                }
                if s.n_missing > 0 {
                    writeln!(out, "{:<28}{:<32}{}", "", "(missing)", s.n_missing).unwrap();
                }
            }
            Summary::Continuous(s) => {
                writeln!(
                    out,
                    "{c:<28}median {} [{}-{}], mean {:.2}, sd {:.2}, q1 {}, q3 {}, n {}",
                    s.median, s.min, s.max, s.mean, s.sd, s.q1, s.q3, s.n
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}
