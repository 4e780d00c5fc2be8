use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{ColumnValues, Dataset};
use super::schema::ColumnSpec;
use super::TabularError;
use crate::matrix::Matrix;

/// A raw input value for one variable of a single record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Label(String),
}

impl Value {
    /// Numeric reading; labels that parse as numbers are accepted.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Label(s) => s.trim().parse().ok(),
        }
    }

    /// Label reading; numbers are rendered in their shortest decimal form.
    pub fn as_label(&self) -> String {
        match self {
            Value::Number(x) => format!("{x}"),
            Value::Label(s) => s.clone(),
        }
    }
}

/// One patient's inputs, keyed by variable name.
pub type Record = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum FeatureEncoding {
    OneHot {
        column: String,
        categories: Vec<String>,
        offset: usize,
    },
    Standardized {
        column: String,
        mean: f64,
        sd: f64,
        offset: usize,
    },
}

impl FeatureEncoding {
    pub fn column(&self) -> &str {
        match self {
            FeatureEncoding::OneHot { column, .. } | FeatureEncoding::Standardized { column, .. } => column,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureEncoding::OneHot { categories, .. } => categories.len(),
            FeatureEncoding::Standardized { .. } => 1,
        }
    }

    fn offset(&self) -> usize {
        match self {
            FeatureEncoding::OneHot { offset, .. } | FeatureEncoding::Standardized { offset, .. } => *offset,
        }
    }
}

/// Numeric encoding of a set of feature columns: one-hot blocks over the
/// declared categories of categorical columns and z-scores (sample standard
/// deviation) for continuous columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    features: Vec<FeatureEncoding>,
    width: usize,
}

pub fn fit_encoder<S: AsRef<str>>(ds: &Dataset, feature_vars: &[S]) -> Result<Encoder, TabularError> {
    let mut features = Vec::with_capacity(feature_vars.len());
    let mut offset = 0;
    for name in feature_vars {
        let name = name.as_ref();
        let (_, spec, col) = ds.require(name)?;
        if (0..ds.n_rows()).any(|r| !col.has_value(r)) {
            return Err(TabularError::IncompleteColumn(name.to_string()));
        }
        let enc = match col.values() {
            ColumnValues::Categorical(codes) => {
                let mut seen = vec![false; spec.arity()];
                for c in codes.iter().flatten() {
                    seen[*c as usize] = true;
                }
                if seen.iter().filter(|&&s| s).count() < 2 {
                    return Err(TabularError::SingleCategory(name.to_string()));
                }
                FeatureEncoding::OneHot {
                    column: name.to_string(),
                    categories: spec.category_labels().to_vec(),
                    offset,
                }
            }
            ColumnValues::Continuous(values) => {
                let xs: Vec<f64> = values.iter().flatten().copied().collect();
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = if xs.len() > 1 {
                    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                let sd = var.sqrt();
                if sd.is_nan() || sd <= 0.0 {
                    return Err(TabularError::ConstantColumn(name.to_string()));
                }
                FeatureEncoding::Standardized {
                    column: name.to_string(),
                    mean,
                    sd,
                    offset,
                }
            }
        };
        offset += enc.width();
        features.push(enc);
    }
    Ok(Encoder {
        features,
        width: offset,
    })
}

impl Encoder {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn features(&self) -> &[FeatureEncoding] {
        &self.features
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(FeatureEncoding::column)
    }

    /// Column specs describing the inputs this encoder accepts.
    pub fn input_specs(&self) -> Vec<ColumnSpec> {
        self.features
            .iter()
            .map(|f| match f {
                FeatureEncoding::OneHot { column, categories, .. } => {
                    ColumnSpec::categorical(column.clone(), categories.clone())
                }
                FeatureEncoding::Standardized { column, .. } => ColumnSpec::continuous(column.clone()),
            })
            .collect()
    }

    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("encoder serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Encodes every row of `ds` (n_rows x width).
    pub fn encode(&self, ds: &Dataset) -> Result<Matrix, TabularError> {
        let mut out = Matrix::zeros(ds.n_rows(), self.width);
        for f in &self.features {
            let (_, spec, col) = ds.require(f.column())?;
            match (f, col.values()) {
                (
                    FeatureEncoding::OneHot {
                        categories,
                        offset,
                        column,
                    },
                    ColumnValues::Categorical(codes),
                ) => {
                    // map dataset category index -> encoder position
                    let lookup: Vec<Option<usize>> = spec
                        .category_labels()
                        .iter()
                        .map(|l| categories.iter().position(|c| c == l))
                        .collect();
                    for (row, code) in codes.iter().enumerate() {
                        let code = code.ok_or_else(|| TabularError::IncompleteColumn(column.clone()))?;
                        let pos = lookup[code as usize].ok_or_else(|| TabularError::UnknownCategory {
                            row: Some(row),
                            column: column.clone(),
                            value: spec.category_labels()[code as usize].clone(),
                        })?;
                        out.row_mut(row)[offset + pos] = 1.0;
                    }
                }
                (
                    FeatureEncoding::Standardized {
                        mean,
                        sd,
                        offset,
                        column,
                    },
                    ColumnValues::Continuous(values),
                ) => {
                    for (row, v) in values.iter().enumerate() {
                        let v = v.ok_or_else(|| TabularError::IncompleteColumn(column.clone()))?;
                        out.row_mut(row)[*offset] = (v - mean) / sd;
                    }
                }
                (FeatureEncoding::OneHot { column, .. }, _) => {
                    return Err(TabularError::NotCategorical(column.clone()))
                }
                (FeatureEncoding::Standardized { column, .. }, _) => {
                    return Err(TabularError::NotContinuous(column.clone()))
                }
            }
        }
        Ok(out)
    }

    /// Encodes a single record. Every encoder variable must be present.
    pub fn encode_record(&self, record: &Record) -> Result<Vec<f64>, TabularError> {
        let mut out = vec![0.0; self.width];
        for f in &self.features {
            let column = f.column();
            let value = record
                .get(column)
                .ok_or_else(|| TabularError::MissingVariable(column.to_string()))?;
            match f {
                FeatureEncoding::OneHot { categories, .. } => {
                    let label = value.as_label();
                    let pos =
                        categories
                            .iter()
                            .position(|c| *c == label)
                            .ok_or_else(|| TabularError::UnknownCategory {
                                row: None,
                                column: column.to_string(),
                                value: label.clone(),
                            })?;
                    out[f.offset() + pos] = 1.0;
                }
                FeatureEncoding::Standardized { mean, sd, .. } => {
                    let x = value
                        .as_number()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| TabularError::BadValue {
                            column: column.to_string(),
                            value: value.as_label(),
                        })?;
                    out[f.offset()] = (x - mean) / sd;
                }
            }
        }
        Ok(out)
    }
}
