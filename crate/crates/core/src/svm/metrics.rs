use serde::{Deserialize, Serialize};

use super::SvmError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn record(&mut self, actual_positive: bool, predicted_positive: bool) {
        match (actual_positive, predicted_positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub youden: f64,
    pub accuracy: f64,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, SvmError> {
    let pos = cm.tp + cm.fn_;
    let neg = cm.tn + cm.fp;
    if pos == 0 {
        return Err(SvmError::UndefinedMetric("no actual positives"));
    }
    if neg == 0 {
        return Err(SvmError::UndefinedMetric("no actual negatives"));
    }
    let sensitivity = cm.tp as f64 / pos as f64;
    let specificity = cm.tn as f64 / neg as f64;
    Ok(Metrics {
        sensitivity,
        specificity,
        youden: sensitivity + specificity - 1.0,
        accuracy: (cm.tp + cm.tn) as f64 / cm.total() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_table() {
        let m = metrics(&ConfusionMatrix::new(145, 2, 2729, 16)).unwrap();
        assert!((m.sensitivity - 0.9006).abs() < 1e-4);
        assert!((m.specificity - 0.99927).abs() < 1e-5);
    }

    #[test]
    fn perfect_and_undefined() {
        let m = metrics(&ConfusionMatrix::new(10, 0, 10, 0)).unwrap();
        assert_eq!(
            (m.sensitivity, m.specificity, m.youden, m.accuracy),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(matches!(
            metrics(&ConfusionMatrix::new(0, 3, 5, 0)),
            Err(SvmError::UndefinedMetric(_))
        ));
        assert!(matches!(
            metrics(&ConfusionMatrix::new(3, 0, 0, 1)),
            Err(SvmError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn relabeling_swaps_sensitivity_and_specificity() {
        let a = metrics(&ConfusionMatrix::new(7, 3, 20, 5)).unwrap();
        let b = metrics(&ConfusionMatrix::new(20, 5, 7, 3)).unwrap();
        assert_eq!(a.sensitivity, b.specificity);
        assert_eq!(a.specificity, b.sensitivity);
    }

    #[test]
    fn serializes_fn_field() {
        let s = serde_json::to_string(&ConfusionMatrix::new(1, 2, 3, 4)).unwrap();
        assert_eq!(s, r#"{"tp":1,"fp":2,"tn":3,"fn":4}"#);
    }
}
