use serde::{Deserialize, Serialize};

use super::kernel::rbf_kernel;
use super::SvmError;
use crate::matrix::Matrix;

/// Trained binary RBF SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    support_vectors: Matrix,
    /// alpha_i * y_i per support vector.
    coefficients: Vec<f64>,
    bias: f64,
    gamma: f64,
    cost: f64,
    /// `[negative, positive]` class names.
    labels: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoder_fingerprint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub positive: bool,
    pub decision_value: f64,
}

impl SvmModel {
    pub(crate) fn from_solution(x: &Matrix, y: &[i8], alpha: &[f64], bias: f64, gamma: f64, cost: f64) -> Self {
        let sv: Vec<usize> = (0..y.len()).filter(|&i| alpha[i] > 0.0).collect();
        Self {
            support_vectors: x.select_rows(&sv),
            coefficients: sv.iter().map(|&i| alpha[i] * y[i] as f64).collect(),
            bias,
            gamma,
            cost,
            labels: ["negative".into(), "positive".into()],
            encoder_fingerprint: None,
        }
    }

    pub fn with_labels(mut self, negative: impl Into<String>, positive: impl Into<String>) -> Self {
        self.labels = [negative.into(), positive.into()];
        self
    }

    pub fn with_encoder_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.encoder_fingerprint = Some(fingerprint.into());
        self
    }

    pub fn support_vectors(&self) -> &Matrix {
        &self.support_vectors
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn labels(&self) -> &[String; 2] {
        &self.labels
    }

    pub fn encoder_fingerprint(&self) -> Option<&str> {
        self.encoder_fingerprint.as_deref()
    }

    pub fn dimension(&self) -> usize {
        self.support_vectors.cols()
    }

    /// Sum of alpha_i y_i K(s_i, x) plus the bias.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dimension() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let mut f = self.bias;
        for (sv, c) in self.support_vectors.iter_rows().zip(&self.coefficients) {
            f += c * rbf_kernel(sv, x, self.gamma)?;
        }
        Ok(f)
    }

    /// Positive iff the decision value is strictly above zero.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, SvmError> {
        let d = self.decision_value(x)?;
        Ok(Prediction {
            positive: d > 0.0,
            decision_value: d,
        })
    }

    pub fn label_of(&self, p: &Prediction) -> &str {
        &self.labels[usize::from(p.positive)]
    }
}
