use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::dataset::{Column, ColumnValues, Dataset};
use super::TabularError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnCleanCount {
    pub column: String,
    pub sentinel: usize,
    pub out_of_range: usize,
}

/// Tally of cells converted to missing by [`clean_sentinels`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub columns: Vec<ColumnCleanCount>,
    pub total_conversions: usize,
    pub rows_touched: usize,
}

impl CleanReport {
    pub fn sentinel_total(&self) -> usize {
        self.columns.iter().map(|c| c.sentinel).sum()
    }

    pub fn out_of_range_total(&self) -> usize {
        self.columns.iter().map(|c| c.out_of_range).sum()
    }
}

/// Turns every pending sentinel cell and every continuous value outside its
/// declared range into a missing cell. Idempotent.
pub fn clean_sentinels(ds: &Dataset) -> (Dataset, CleanReport) {
    let mut touched = BTreeSet::new();
    let mut counts = Vec::with_capacity(ds.n_cols());
    let mut columns = Vec::with_capacity(ds.n_cols());

    for (spec, col) in ds.schema().columns().iter().zip(ds.columns()) {
        let sentinel = col.sentinels.len();
        touched.extend(col.sentinels.keys().copied());
        let mut out_of_range = 0;
        let values = match &col.values {
            ColumnValues::Continuous(v) => ColumnValues::Continuous(
                v.iter()
                    .enumerate()
                    .map(|(row, cell)| match *cell {
                        Some(x) if !spec.in_range(x) => {
                            out_of_range += 1;
                            touched.insert(row);
                            None
                        }
                        other => other,
                    })
                    .collect(),
            ),
            ColumnValues::Categorical(v) => ColumnValues::Categorical(v.clone()),
        };
        counts.push(ColumnCleanCount {
            column: spec.name.clone(),
            sentinel,
            out_of_range,
        });
        columns.push(Column::new(values));
    }

    let total_conversions = counts.iter().map(|c| c.sentinel + c.out_of_range).sum();
    let report = CleanReport {
        columns: counts,
        total_conversions,
        rows_touched: touched.len(),
    };
    (ds.map_columns(columns), report)
}

/// Drops rows with a missing (or pending sentinel) cell in any of `vars`.
/// Returns the reduced dataset and the number of rows removed.
pub fn complete_cases<S: AsRef<str>>(ds: &Dataset, vars: &[S]) -> Result<(Dataset, usize), TabularError> {
    let cols = ds.resolve(vars)?;
    let keep: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.row_complete(r, &cols)).collect();
    let excluded = ds.n_rows() - keep.len();
    Ok((ds.select_rows(&keep), excluded))
}
