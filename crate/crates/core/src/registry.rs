//! Versioned, schema-stamped model artifacts and a directory-backed store.
//!
//! An artifact is one JSON document:
//!
//! | field | content |
//! |---|---|
//! | `format` | always `caselab-model` |
//! | `format_version` | envelope version, currently 1 |
//! | `id` | artifact id, also the file stem |
//! | `kind` | `svm` or `bayes_net` |
//! | `created_at` | RFC 3339 timestamp |
//! | `schema_fingerprint` | SHA-256 of `input_schema` |
//! | `input_schema` | column specs a prediction record is checked against |
//! | `required_variables` | variables every record must supply |
//! | `training` | training configuration |
//! | `metrics` | training metrics |
//! | `payload` | `{encoder, model}` for `svm`, `{network, target}` for `bayes_net` |

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bayesnet::{query, BayesError, BayesNet, Evidence, Posterior};
use crate::svm::{SvmError, SvmModel};
use crate::tabular::{ColumnKind, ColumnSpec, Encoder, Record, Schema, SchemaError, TabularError};

pub const FORMAT: &str = "caselab-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed artifact: {0}")]
    Malformed(String),
    #[error("not a model artifact (format `{0}`)")]
    UnsupportedFormat(String),
    #[error("unsupported artifact format version {0}")]
    UnsupportedVersion(u64),
    #[error("schema fingerprint does not match the stamped input schema")]
    FingerprintMismatch,
    #[error("encoder fingerprint does not match the model")]
    EncoderMismatch,
    #[error("missing variable `{0}`")]
    MissingVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown category `{value}` for `{variable}`")]
    UnknownCategory { variable: String, value: String },
    #[error("value `{value}` is not valid for `{variable}`")]
    BadValue { variable: String, value: String },
    #[error("invalid artifact id `{0}`")]
    InvalidId(String),
    #[error("artifact `{0}` already exists")]
    Duplicate(String),
    #[error("artifact `{0}` not found")]
    NotFound(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

impl RegistryError {
    /// Record field an input error refers to.
    pub fn field(&self) -> Option<&str> {
        match self {
            RegistryError::MissingVariable(v) | RegistryError::UnknownVariable(v) => Some(v),
            RegistryError::UnknownCategory { variable, .. } | RegistryError::BadValue { variable, .. } => {
                Some(variable)
            }
            RegistryError::Bayes(BayesError::TargetInEvidence(v)) => Some(v),
            _ => None,
        }
    }

    /// The record itself is at fault, as opposed to the artifact.
    pub fn is_input_error(&self) -> bool {
        self.field().is_some() || matches!(self, RegistryError::Bayes(BayesError::ZeroProbabilityEvidence))
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Payload {
    Svm { encoder: Encoder, model: SvmModel },
    BayesNet { network: BayesNet, target: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    BayesNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub format_version: u32,
    pub id: String,
    pub created_at: String,
    pub schema_fingerprint: String,
    pub input_schema: Vec<ColumnSpec>,
    pub required_variables: Vec<String>,
    pub training: serde_json::Value,
    pub metrics: serde_json::Value,
    #[serde(flatten)]
    pub payload: Payload,
}

/// Artifact listing entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSummary {
    pub id: String,
    pub kind: ModelKind,
    pub created_at: String,
    pub required_variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionOutput {
    Svm {
        label: String,
        positive: bool,
        decision_value: f64,
    },
    BayesNet(Posterior),
}

fn fingerprint_of(specs: &[ColumnSpec]) -> Result<String, RegistryError> {
    Ok(Schema::new(specs.to_vec())?.fingerprint())
}

fn content_id(prefix: &str, payload: &Payload, created_at: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(payload).expect("payload serializes"));
    h.update(created_at.as_bytes());
    format!("{prefix}-{}", &hex::encode(h.finalize())[..16])
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl ModelArtifact {
    /// SVM artifact. The input schema is taken from `training_schema` for
    /// the encoder's variables.
    pub fn svm(
        encoder: Encoder,
        model: SvmModel,
        training_schema: &Schema,
        training: serde_json::Value,
        metrics: serde_json::Value,
    ) -> Result<Self, RegistryError> {
        if model.encoder_fingerprint().is_some_and(|f| f != encoder.fingerprint()) {
            return Err(RegistryError::EncoderMismatch);
        }
        let required: Vec<String> = encoder.variables().map(str::to_string).collect();
        let input_schema = training_schema.subset(&required)?.columns().to_vec();
        Self::assemble(
            "svm",
            Payload::Svm { encoder, model },
            input_schema,
            required,
            training,
            metrics,
        )
    }

    /// Bayesian-network artifact answering queries on `target`. Every other
    /// node may be given as evidence; the target's ancestors are required.
    pub fn bayes_net(
        network: BayesNet,
        target: &str,
        training: serde_json::Value,
        metrics: serde_json::Value,
    ) -> Result<Self, RegistryError> {
        let t = network.node_index(target)?;
        let dag = network.dag();
        let ancestors = dag.ancestors(t);
        let required: Vec<String> = ancestors.iter().map(|&i| dag.nodes()[i].clone()).collect();
        let input_schema = (0..dag.len())
            .filter(|&i| i != t)
            .map(|i| ColumnSpec::categorical(dag.nodes()[i].clone(), network.categories(i).iter().cloned()))
            .collect();
        let payload = Payload::BayesNet {
            network,
            target: target.to_string(),
        };
        Self::assemble("bn", payload, input_schema, required, training, metrics)
    }

    fn assemble(
        prefix: &str,
        payload: Payload,
        input_schema: Vec<ColumnSpec>,
        required_variables: Vec<String>,
        training: serde_json::Value,
        metrics: serde_json::Value,
    ) -> Result<Self, RegistryError> {
        let created_at = now();
        Ok(Self {
            format: FORMAT.to_string(),
            format_version: FORMAT_VERSION,
            id: content_id(prefix, &payload, &created_at),
            schema_fingerprint: fingerprint_of(&input_schema)?,
            created_at,
            input_schema,
            required_variables,
            training,
            metrics,
            payload,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.payload {
            Payload::Svm { .. } => ModelKind::Svm,
            Payload::BayesNet { .. } => ModelKind::BayesNet,
        }
    }

    pub fn summary(&self) -> ArtifactSummary {
        ArtifactSummary {
            id: self.id.clone(),
            kind: self.kind(),
            created_at: self.created_at.clone(),
            required_variables: self.required_variables.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    /// Parses an artifact, rejecting foreign formats and unknown versions
    /// before reading the payload.
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| RegistryError::Malformed(e.to_string()))?;
        let format = raw.get("format").and_then(|f| f.as_str()).unwrap_or_default();
        if format != FORMAT {
            return Err(RegistryError::UnsupportedFormat(format.to_string()));
        }
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(RegistryError::UnsupportedVersion(v)),
            None => return Err(RegistryError::Malformed("missing format_version".into())),
        }
        serde_json::from_value(raw).map_err(|e| RegistryError::Malformed(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), RegistryError> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()).map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    /// Checks the stamps that guard prediction.
    pub fn verify(&self) -> Result<(), RegistryError> {
        if fingerprint_of(&self.input_schema)? != self.schema_fingerprint {
            return Err(RegistryError::FingerprintMismatch);
        }
        if let Payload::Svm { encoder, model } = &self.payload {
            if model.encoder_fingerprint().is_some_and(|f| f != encoder.fingerprint()) {
                return Err(RegistryError::EncoderMismatch);
            }
        }
        Ok(())
    }

    /// Checks every record field against the input schema.
    fn check_record(&self, record: &Record) -> Result<(), RegistryError> {
        for name in record.keys() {
            if !self.input_schema.iter().any(|s| &s.name == name) {
                return Err(RegistryError::UnknownVariable(name.clone()));
            }
        }
        for name in &self.required_variables {
            if !record.contains_key(name) {
                return Err(RegistryError::MissingVariable(name.clone()));
            }
        }
        for spec in &self.input_schema {
            let Some(value) = record.get(&spec.name) else { continue };
            match spec.kind {
                ColumnKind::Categorical => {
                    let label = value.as_label();
                    if spec.category_index(&label).is_none() {
                        return Err(RegistryError::UnknownCategory {
                            variable: spec.name.clone(),
                            value: label,
                        });
                    }
                }
                ColumnKind::Continuous => {
                    if !value.as_number().is_some_and(|x| x.is_finite() && spec.in_range(x)) {
                        return Err(RegistryError::BadValue {
                            variable: spec.name.clone(),
                            value: value.as_label(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Prediction for one patient record.
pub fn personalized_predict(artifact: &ModelArtifact, record: &Record) -> Result<PredictionOutput, RegistryError> {
    artifact.verify()?;
    artifact.check_record(record)?;
    match &artifact.payload {
        Payload::Svm { encoder, model } => {
            let x = encoder.encode_record(record).map_err(|e| match e {
                TabularError::MissingVariable(v) => RegistryError::MissingVariable(v),
                TabularError::UnknownCategory { column, value, .. } => RegistryError::UnknownCategory {
                    variable: column,
                    value,
                },
                TabularError::BadValue { column, value } => RegistryError::BadValue {
                    variable: column,
                    value,
                },
                other => RegistryError::Malformed(other.to_string()),
            })?;
            let p = model.predict(&x)?;
            Ok(PredictionOutput::Svm {
                label: model.label_of(&p).to_string(),
                positive: p.positive,
                decision_value: p.decision_value,
            })
        }
        Payload::BayesNet { network, target } => {
            let evidence: Evidence = record.iter().map(|(k, v)| (k.clone(), v.as_label())).collect();
            Ok(PredictionOutput::BayesNet(query(network, &evidence, target)?))
        }
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Artifacts stored as `<id>.json` files in one directory.
#[derive(Debug)]
pub struct Registry {
    dir: PathBuf,
    artifacts: BTreeMap<String, Arc<ModelArtifact>>,
}

impl Registry {
    /// Opens (creating if needed) `dir` and loads every artifact in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut artifacts = BTreeMap::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let artifact = ModelArtifact::load(&path)?;
            artifacts.insert(artifact.id.clone(), Arc::new(artifact));
        }
        Ok(Self { dir, artifacts })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes the artifact file and adds it to the index.
    pub fn register(&mut self, artifact: ModelArtifact) -> Result<Arc<ModelArtifact>, RegistryError> {
        if !valid_id(&artifact.id) {
            return Err(RegistryError::InvalidId(artifact.id));
        }
        if self.artifacts.contains_key(&artifact.id) {
            return Err(RegistryError::Duplicate(artifact.id));
        }
        artifact.save(&self.dir.join(format!("{}.json", artifact.id)))?;
        let artifact = Arc::new(artifact);
        self.artifacts.insert(artifact.id.clone(), artifact.clone());
        Ok(artifact)
    }

    pub fn get(&self, id: &str) -> Option<Arc<ModelArtifact>> {
        self.artifacts.get(id).cloned()
    }

    pub fn list(&self) -> Vec<ArtifactSummary> {
        self.artifacts.values().map(|a| a.summary()).collect()
    }

    pub fn len(&self) -> usize {
        self.artifacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.artifacts.is_empty()
    }
}
