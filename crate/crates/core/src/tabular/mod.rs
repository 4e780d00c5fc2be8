//! Typed tabular data: schemas, CSV ingestion, sentinel cleaning, quartile
//! binning, complete-case filtering and numeric encoding.

mod binning;
mod clean;
mod dataset;
mod encoder;
mod io;
mod schema;

use thiserror::Error;

pub use binning::quartile_bin;
pub use clean::{clean_sentinels, complete_cases, CleanReport, ColumnCleanCount};
pub use dataset::{Cell, Column, ColumnValues, Dataset, Provenance};
pub use encoder::{fit_encoder, Encoder, FeatureEncoding, Record, Value};
pub use io::{format_number, load_csv, read_csv, save_csv, write_csv};
pub use schema::{ColumnKind, ColumnSpec, Schema, SchemaError};

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("file is empty")]
    EmptyFile,
    #[error("header is missing column `{0}`")]
    MissingColumn(String),
    #[error("header names column `{0}` more than once")]
    DuplicateColumn(String),
    #[error("line {line}: cell `{value}` in column `{column}` (row {row}) does not parse")]
    BadCell {
        row: usize,
        line: u64,
        column: String,
        value: String,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not continuous")]
    NotContinuous(String),
    #[error("column `{0}` is not categorical")]
    NotCategorical(String),
    #[error("cannot bin column `{column}`: {reason}")]
    DegenerateBinning { column: String, reason: String },
    #[error("bin labels for `{0}` must be four distinct non-empty strings")]
    InvalidLabels(String),
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("column `{0}` has fewer than two observed categories")]
    SingleCategory(String),
    #[error("column `{0}` has missing cells")]
    IncompleteColumn(String),
    #[error("unknown category `{value}` for `{column}`{}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    UnknownCategory {
        row: Option<usize>,
        column: String,
        value: String,
    },
    #[error("missing variable `{0}`")]
    MissingVariable(String),
    #[error("value `{value}` is not valid for `{column}`")]
    BadValue { column: String, value: String },
    #[error("malformed dataset: {0}")]
    Shape(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
