use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

impl std::fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnKind::Continuous => f.write_str("continuous"),
            ColumnKind::Categorical => f.write_str("categorical"),
        }
    }
}

/// Declaration of one column: its kind, the closed category set for
/// categorical columns, an optional plausibility range for continuous ones,
/// and the raw codes that mean "not available".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub sentinel_codes: BTreeSet<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: None,
            valid_range: None,
            sentinel_codes: BTreeSet::new(),
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: Some(categories.into_iter().map(Into::into).collect()),
            valid_range: None,
            sentinel_codes: BTreeSet::new(),
        }
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.valid_range = Some([min, max]);
        self
    }

    pub fn with_sentinels<S: Into<String>>(mut self, codes: impl IntoIterator<Item = S>) -> Self {
        self.sentinel_codes.extend(codes.into_iter().map(Into::into));
        self
    }

    /// Category labels; empty for continuous columns.
    pub fn category_labels(&self) -> &[String] {
        self.categories.as_deref().unwrap_or(&[])
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.category_labels().iter().position(|c| c == label)
    }

    pub fn arity(&self) -> usize {
        self.category_labels().len()
    }

    pub fn in_range(&self, v: f64) -> bool {
        match self.valid_range {
            Some([lo, hi]) => v >= lo && v <= hi,
            None => true,
        }
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self.name.trim().is_empty() {
            return Err(SchemaError::EmptyName);
        }
        match self.kind {
            ColumnKind::Categorical => {
                if self.valid_range.is_some() {
                    return Err(SchemaError::RangeOnCategorical(self.name.clone()));
                }
                let cats = self
                    .categories
                    .as_ref()
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| SchemaError::MissingCategories(self.name.clone()))?;
                let mut seen = HashSet::new();
                for c in cats {
                    if c.is_empty() {
                        return Err(SchemaError::EmptyCategory(self.name.clone()));
                    }
                    if !seen.insert(c.as_str()) {
                        return Err(SchemaError::DuplicateCategory {
                            column: self.name.clone(),
                            category: c.clone(),
                        });
                    }
                }
            }
            ColumnKind::Continuous => {
                if self.categories.is_some() {
                    return Err(SchemaError::CategoriesOnContinuous(self.name.clone()));
                }
                if let Some([lo, hi]) = self.valid_range {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(SchemaError::InvalidRange(self.name.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("column name must not be empty")]
    EmptyName,
    #[error("duplicate column name `{0}`")]
    DuplicateName(String),
    #[error("categorical column `{0}` needs a non-empty category list")]
    MissingCategories(String),
    #[error("continuous column `{0}` must not declare categories")]
    CategoriesOnContinuous(String),
    #[error("categorical column `{0}` must not declare a valid range")]
    RangeOnCategorical(String),
    #[error("column `{0}` has an invalid range (need finite min <= max)")]
    InvalidRange(String),
    #[error("column `{0}` has an empty category label")]
    EmptyCategory(String),
    #[error("column `{column}` lists category `{category}` twice")]
    DuplicateCategory { column: String, category: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

/// Ordered, validated list of column declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    columns: Vec<ColumnSpec>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = SchemaError;
    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        Schema::new(raw.columns)
    }
}

impl From<Schema> for RawSchema {
    fn from(s: Schema) -> Self {
        RawSchema { columns: s.columns }
    }
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self, SchemaError> {
        let mut names = HashSet::new();
        for c in &columns {
            c.validate()?;
            if !names.insert(c.name.as_str()) {
                return Err(SchemaError::DuplicateName(c.name.clone()));
            }
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Schema restricted to `names`, in the order given.
    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<Schema, SchemaError> {
        let cols = names
            .iter()
            .map(|n| {
                self.column(n.as_ref())
                    .cloned()
                    .ok_or_else(|| SchemaError::UnknownColumn(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Schema::new(cols)
    }

    pub(crate) fn replace_column(&mut self, idx: usize, spec: ColumnSpec) -> Result<(), SchemaError> {
        let mut cols = self.columns.clone();
        cols[idx] = spec;
        *self = Schema::new(cols)?;
        Ok(())
    }

    /// Hex SHA-256 over the canonical JSON form of the schema.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.columns).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_and_empty_names() {
        let a = ColumnSpec::continuous("age");
        assert_eq!(
            Schema::new(vec![a.clone(), a]).unwrap_err(),
            SchemaError::DuplicateName("age".into())
        );
        assert_eq!(
            Schema::new(vec![ColumnSpec::continuous(" ")]).unwrap_err(),
            SchemaError::EmptyName
        );
    }

    #[test]
    fn kind_specific_fields_are_enforced() {
        let mut c = ColumnSpec::categorical("g", ["M", "F"]);
        c.valid_range = Some([0.0, 1.0]);
        assert!(matches!(Schema::new(vec![c]), Err(SchemaError::RangeOnCategorical(_))));

        let mut c = ColumnSpec::continuous("x");
        c.categories = Some(vec!["a".into()]);
        assert!(matches!(
            Schema::new(vec![c]),
            Err(SchemaError::CategoriesOnContinuous(_))
        ));

        let mut c = ColumnSpec::categorical("g", ["M"]);
        c.categories = None;
        assert!(matches!(Schema::new(vec![c]), Err(SchemaError::MissingCategories(_))));

        let c = ColumnSpec::continuous("x").with_range(5.0, 1.0);
        assert!(matches!(Schema::new(vec![c]), Err(SchemaError::InvalidRange(_))));
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let text = r#"
            [[columns]]
            name = "gender"
            kind = "categorical"
            categories = ["Men", "Women"]
            sentinel_codes = ["999"]

            [[columns]]
            name = "age"
            kind = "continuous"
            valid_range = [10, 120]
        "#;
        let s: Schema = toml::from_str(text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.column("age").unwrap().valid_range, Some([10.0, 120.0]));
        let back: Schema = toml::from_str(&toml::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);

        let bad = r#"
            [[columns]]
            name = "gender"
            kind = "categorical"
        "#;
        assert!(toml::from_str::<Schema>(bad).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Schema::new(vec![ColumnSpec::categorical("g", ["M", "F"])]).unwrap();
        let b = Schema::new(vec![ColumnSpec::categorical("g", ["M", "X"])]).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
