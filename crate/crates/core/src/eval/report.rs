use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;
use crate::error::{Error, Result};

/// Precision, recall and F1 for one class. A metric whose denominator is
/// zero is reported as 0 and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl ClassMetrics {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Support-weighted mean of per-class F1.
    pub weighted_f1: f64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_report(
    cm: &ConfusionMatrix,
    class_names: &[String],
) -> Result<ClassificationReport> {
    let n = cm.num_classes();
    if class_names.len() != n {
        return Err(Error::InvalidMatrix(format!(
            "{n} classes but {} names",
            class_names.len()
        )));
    }
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidMatrix("matrix has no samples".into()));
    }
    let mut per_class = Vec::with_capacity(n);
    for (i, name) in class_names.iter().enumerate() {
        let tp = cm.get(i, i);
        let support = cm.row_sum(i);
        let mut undefined = Vec::new();
        let precision = ratio(tp, cm.column_sum(i)).unwrap_or_else(|| {
            undefined.push("precision".to_string());
            0.0
        });
        let recall = ratio(tp, support).unwrap_or_else(|| {
            undefined.push("recall".to_string());
            0.0
        });
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f1".to_string());
            0.0
        };
        per_class.push(ClassMetrics {
            class_name: name.clone(),
            precision,
            recall,
            f1,
            support,
            degenerate: !undefined.is_empty(),
            undefined,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
    let weighted_f1 = per_class
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / total as f64;
    Ok(ClassificationReport {
        accuracy: cm.diagonal() as f64 / total as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        weighted_f1,
        per_class,
    })
}
