use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, ColumnSpec, Schema};
use super::TabularError;

/// Cell storage for one column. `None` is a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Continuous(Vec<Option<f64>>),
    /// Indices into the column's category list.
    Categorical(Vec<Option<u32>>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Continuous(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn has_value(&self, row: usize) -> bool {
        match self {
            ColumnValues::Continuous(v) => v[row].is_some(),
            ColumnValues::Categorical(v) => v[row].is_some(),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Continuous(v) => ColumnValues::Continuous(rows.iter().map(|&r| v[r]).collect()),
            ColumnValues::Categorical(v) => ColumnValues::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// One column of a dataset.
///
/// Cells whose raw text matched a declared sentinel code are held in
/// `sentinels` (row -> raw code) and carry no value until
/// [`clean_sentinels`](super::clean_sentinels) turns them into missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub(crate) values: ColumnValues,
    pub(crate) sentinels: BTreeMap<usize, String>,
}

impl Column {
    pub fn new(values: ColumnValues) -> Self {
        Self {
            values,
            sentinels: BTreeMap::new(),
        }
    }

    pub fn values(&self) -> &ColumnValues {
        &self.values
    }

    pub fn pending_sentinels(&self) -> &BTreeMap<usize, String> {
        &self.sentinels
    }

    /// True when the cell holds a usable value (neither missing nor a pending sentinel).
    pub fn has_value(&self, row: usize) -> bool {
        self.values.has_value(row)
    }

    pub fn continuous(&self) -> Option<&[Option<f64>]> {
        match &self.values {
            ColumnValues::Continuous(v) => Some(v),
            ColumnValues::Categorical(_) => None,
        }
    }

    pub fn categorical(&self) -> Option<&[Option<u32>]> {
        match &self.values {
            ColumnValues::Categorical(v) => Some(v),
            ColumnValues::Continuous(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        let mut sentinels = BTreeMap::new();
        for (new_row, &old_row) in rows.iter().enumerate() {
            if let Some(code) = self.sentinels.get(&old_row) {
                sentinels.insert(new_row, code.clone());
            }
        }
        Column {
            values: self.values.select(rows),
            sentinels,
        }
    }
}

/// Borrowed view of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Missing,
    Sentinel(&'a str),
    Number(f64),
    Category(&'a str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub ingested_at: String,
}

impl Provenance {
    pub fn now(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            ingested_at: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// Rectangular typed table. Immutable: every operation returns a new dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Column>,
    n_rows: usize,
    provenance: Provenance,
}

impl PartialEq for Dataset {
    /// Content equality; provenance is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.n_rows == other.n_rows && self.columns == other.columns
    }
}

impl Dataset {
    /// Assembles a dataset, checking rectangularity, finiteness and category indices.
    pub fn from_columns(schema: Schema, columns: Vec<Column>, provenance: Provenance) -> Result<Self, TabularError> {
        if columns.len() != schema.len() {
            return Err(TabularError::Shape(format!(
                "{} columns for a schema of {}",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, |c| c.values.len());
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.values.len() != n_rows {
                return Err(TabularError::Shape(format!(
                    "column `{}` has {} cells, expected {n_rows}",
                    spec.name,
                    col.values.len()
                )));
            }
            match (&col.values, spec.kind) {
                (ColumnValues::Continuous(v), ColumnKind::Continuous) => {
                    if v.iter().flatten().any(|x| !x.is_finite()) {
                        return Err(TabularError::Shape(format!(
                            "column `{}` has a non-finite value",
                            spec.name
                        )));
                    }
                }
                (ColumnValues::Categorical(v), ColumnKind::Categorical) => {
                    let arity = spec.arity() as u32;
                    if v.iter().flatten().any(|&i| i >= arity) {
                        return Err(TabularError::Shape(format!(
                            "column `{}` has a category index out of range",
                            spec.name
                        )));
                    }
                }
                _ => {
                    return Err(TabularError::Shape(format!(
                        "column `{}` storage does not match its declared kind",
                        spec.name
                    )))
                }
            }
            if col.sentinels.keys().any(|&r| r >= n_rows || col.values.has_value(r)) {
                return Err(TabularError::Shape(format!(
                    "column `{}` has an inconsistent sentinel cell",
                    spec.name
                )));
            }
        }
        Ok(Self {
            schema,
            columns,
            n_rows,
            provenance,
        })
    }

    /// Complete categorical dataset from row-major category codes.
    pub fn from_codes<R: AsRef<[u32]>>(specs: Vec<ColumnSpec>, rows: &[R]) -> Result<Self, TabularError> {
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != specs.len()) {
            return Err(TabularError::Shape(format!(
                "row {bad} does not match the schema width"
            )));
        }
        let columns = (0..specs.len())
            .map(|j| {
                Column::new(ColumnValues::Categorical(
                    rows.iter().map(|r| Some(r.as_ref()[j])).collect(),
                ))
            })
            .collect();
        Self::from_columns(Schema::new(specs)?, columns, Provenance::now("generated"))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_at(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column(&self, name: &str) -> Option<(&ColumnSpec, &Column)> {
        let idx = self.schema.index_of(name)?;
        Some((&self.schema.columns()[idx], &self.columns[idx]))
    }

    pub(crate) fn require(&self, name: &str) -> Result<(usize, &ColumnSpec, &Column), TabularError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| TabularError::UnknownColumn(name.to_string()))?;
        Ok((idx, &self.schema.columns()[idx], &self.columns[idx]))
    }

    /// Category index vector of a categorical column.
    pub fn categorical_codes(&self, name: &str) -> Result<&[Option<u32>], TabularError> {
        let (_, _, col) = self.require(name)?;
        col.categorical()
            .ok_or_else(|| TabularError::NotCategorical(name.to_string()))
    }

    /// Values of a continuous column.
    pub fn continuous_values(&self, name: &str) -> Result<&[Option<f64>], TabularError> {
        let (_, _, col) = self.require(name)?;
        col.continuous()
            .ok_or_else(|| TabularError::NotContinuous(name.to_string()))
    }

    pub fn cell(&self, col: usize, row: usize) -> Cell<'_> {
        let column = &self.columns[col];
        if let Some(code) = column.sentinels.get(&row) {
            return Cell::Sentinel(code);
        }
        match &column.values {
            ColumnValues::Continuous(v) => v[row].map_or(Cell::Missing, Cell::Number),
            ColumnValues::Categorical(v) => v[row].map_or(Cell::Missing, |i| {
                Cell::Category(&self.schema.columns()[col].category_labels()[i as usize])
            }),
        }
    }

    /// True when every listed column has a usable value in `row`.
    pub fn row_complete(&self, row: usize, cols: &[usize]) -> bool {
        cols.iter().all(|&c| self.columns[c].has_value(row))
    }

    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>, TabularError> {
        names
            .iter()
            .map(|n| {
                self.schema
                    .index_of(n.as_ref())
                    .ok_or_else(|| TabularError::UnknownColumn(n.as_ref().to_string()))
            })
            .collect()
    }

    /// New dataset with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
            provenance: self.provenance.clone(),
        }
    }

    /// New dataset restricted to the named columns.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset, TabularError> {
        let idx = self.resolve(names)?;
        let schema = self.schema.subset(names)?;
        let columns = idx.iter().map(|&i| self.columns[i].clone()).collect();
        Ok(Dataset {
            schema,
            columns,
            n_rows: self.n_rows,
            provenance: self.provenance.clone(),
        })
    }

    pub(crate) fn replace_column(&self, idx: usize, spec: ColumnSpec, column: Column) -> Result<Dataset, TabularError> {
        let mut schema = self.schema.clone();
        schema.replace_column(idx, spec)?;
        let mut columns = self.columns.clone();
        columns[idx] = column;
        Dataset::from_columns(schema, columns, self.provenance.clone())
    }

    pub(crate) fn map_columns(&self, columns: Vec<Column>) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns,
            n_rows: self.n_rows,
            provenance: self.provenance.clone(),
        }
    }
}
