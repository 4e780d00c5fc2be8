use crate::tabular::{ColumnKind, Dataset};

use super::BayesError;

/// Complete categorical columns in code form.
#[derive(Debug, Clone)]
pub(crate) struct CategoricalData {
    pub names: Vec<String>,
    pub categories: Vec<Vec<String>>,
    pub columns: Vec<Vec<u32>>,
    pub n: usize,
}

impl CategoricalData {
    pub fn from_dataset(ds: &Dataset) -> Result<Self, BayesError> {
        let mut names = Vec::new();
        let mut categories = Vec::new();
        let mut columns = Vec::new();
        for (i, spec) in ds.schema().columns().iter().enumerate() {
            if spec.kind != ColumnKind::Categorical {
                return Err(BayesError::NotCategorical(spec.name.clone()));
            }
            let codes = ds.column_at(i).categorical().expect("categorical storage");
            let col: Option<Vec<u32>> = codes.iter().copied().collect();
            let col = col.ok_or_else(|| BayesError::Incomplete(spec.name.clone()))?;
            if !ds.column_at(i).pending_sentinels().is_empty() {
                return Err(BayesError::Incomplete(spec.name.clone()));
            }
            names.push(spec.name.clone());
            categories.push(spec.category_labels().to_vec());
            columns.push(col);
        }
        Ok(Self {
            names,
            categories,
            columns,
            n: ds.n_rows(),
        })
    }

    pub fn arity(&self, node: usize) -> usize {
        self.categories[node].len()
    }
}
